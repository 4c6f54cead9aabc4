"""Location-scale kernel families and their score machinery.

A kernel is the standardized density f(y; 0, 1) of a location-scale family
f(y; mu, sigma) = f((y - mu) / sigma; 0, 1) / sigma. Everything downstream
(mixture likelihoods, EM steps, score statistics, local power) only touches a
kernel through the behavioral functions collected in KernelFamily:

    log_density_std   y -> log f(y; 0, 1)
    score_location_std   T(y) = -(d/dy) log f(y; 0, 1)  (location score at (0,1))
    score_scale_std      U(y) = y * T(y) - 1            (scale score at (0,1))

plus their y-derivatives (for Newton steps), a standardized sampler, and the
standardized standard deviation (for moment starts). Adding a new family means
registering one more KernelFamily; no other module changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._utils import integrate_line
from .errors import DomainError, NumericalError

__all__ = [
    "LocScaleParams",
    "InfoMatrix",
    "KernelFamily",
    "get_kernel",
    "register_kernel",
    "kernel_names",
    "log_density",
    "score",
    "info_matrix",
    "sample",
]


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocScaleParams:
    """Location and scale of one component; sigma must be strictly positive."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be positive and finite, got {self.sigma!r}")


@dataclass(frozen=True)
class InfoMatrix:
    """Covariance of the standardized score pair (T, U) under f(.; 0, 1).

    Symmetric positive definite for every admissible kernel; sigma_TU is 0 for
    symmetric kernels such as the two shipped ones.
    """

    sigma_T2: float
    sigma_U2: float
    sigma_TU: float = 0.0

    def __post_init__(self):
        if not (self.sigma_T2 > 0 and self.sigma_U2 > 0):
            raise NumericalError("score covariance must have positive diagonal")
        if self.sigma_T2 * self.sigma_U2 - self.sigma_TU**2 <= 0:
            raise NumericalError("score covariance matrix is not positive definite")

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.sigma_T2, self.sigma_TU], [self.sigma_TU, self.sigma_U2]]
        )

    def sqrt(self) -> np.ndarray:
        """Symmetric positive definite square root of as_matrix()."""
        w, v = np.linalg.eigh(self.as_matrix())
        return (v * np.sqrt(w)) @ v.T

    def inv(self) -> np.ndarray:
        det = self.sigma_T2 * self.sigma_U2 - self.sigma_TU**2
        return (
            np.array([[self.sigma_U2, -self.sigma_TU], [-self.sigma_TU, self.sigma_T2]])
            / det
        )


# ---------------------------------------------------------------------------
# Kernel families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelFamily:
    """Behavioral bundle defining one location-scale family."""

    name: str
    log_density_std: Callable[[np.ndarray], np.ndarray]
    score_location_std: Callable[[np.ndarray], np.ndarray]  # T
    score_scale_std: Callable[[np.ndarray], np.ndarray]  # U
    dscore_location_std: Callable[[np.ndarray], np.ndarray]  # dT/dy
    dscore_scale_std: Callable[[np.ndarray], np.ndarray]  # dU/dy
    sample_std: Callable[[np.random.Generator, int], np.ndarray]
    std_sd: float  # sd of f(.; 0, 1), for moment starts
    closed_info: Optional[InfoMatrix] = None  # analytic Cov(T, U) if known
    closed_form_mle: bool = False  # weighted MLE available in closed form

    def __repr__(self):  # keep reprs short in logs and test output
        return f"KernelFamily({self.name!r})"


_LOG_2PI = float(np.log(2.0 * np.pi))


def _normal_logpdf(y):
    y = np.asarray(y, dtype=float)
    return -0.5 * y * y - 0.5 * _LOG_2PI


def _logistic_logpdf(y):
    # f(y) = e^-y / (1 + e^-y)^2; written via |y| so both tails are stable.
    a = np.abs(np.asarray(y, dtype=float))
    return -a - 2.0 * np.log1p(np.exp(-a))


def _logistic_T(y):
    return np.tanh(np.asarray(y, dtype=float) / 2.0)


def _logistic_dT(y):
    t = np.tanh(np.asarray(y, dtype=float) / 2.0)
    return 0.5 * (1.0 - t * t)


def _logistic_sample(rng: np.random.Generator, n: int) -> np.ndarray:
    # Inverse CDF: y = log(u / (1 - u)); clip away the measure-zero endpoint.
    u = np.clip(rng.random(n), 1e-300, None)
    return np.log(u) - np.log1p(-u)


_REGISTRY: dict[str, KernelFamily] = {}


def register_kernel(kernel: KernelFamily) -> None:
    """Add a family to the registry (idempotent for identical names)."""
    _REGISTRY[kernel.name] = kernel


def kernel_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def get_kernel(name: str) -> KernelFamily:
    """Look up a registered kernel family by name.

    Raises:
        DomainError: unknown name.
    """
    try:
        return _REGISTRY[name]
    except KeyError:
        raise DomainError(
            f"unknown kernel {name!r}; available: {', '.join(kernel_names())}"
        ) from None


register_kernel(
    KernelFamily(
        name="normal",
        log_density_std=_normal_logpdf,
        score_location_std=lambda y: np.asarray(y, dtype=float),
        score_scale_std=lambda y: np.asarray(y, dtype=float) ** 2 - 1.0,
        dscore_location_std=lambda y: np.ones_like(np.asarray(y, dtype=float)),
        dscore_scale_std=lambda y: 2.0 * np.asarray(y, dtype=float),
        sample_std=lambda rng, n: rng.standard_normal(n),
        std_sd=1.0,
        closed_info=InfoMatrix(sigma_T2=1.0, sigma_U2=2.0, sigma_TU=0.0),
        closed_form_mle=True,
    )
)

register_kernel(
    KernelFamily(
        name="logistic",
        log_density_std=_logistic_logpdf,
        score_location_std=_logistic_T,
        score_scale_std=lambda y: np.asarray(y, dtype=float) * _logistic_T(y) - 1.0,
        dscore_location_std=_logistic_dT,
        dscore_scale_std=lambda y: _logistic_T(y)
        + np.asarray(y, dtype=float) * _logistic_dT(y),
        sample_std=_logistic_sample,
        std_sd=float(np.pi / np.sqrt(3.0)),
        closed_info=InfoMatrix(
            sigma_T2=1.0 / 3.0,
            sigma_U2=(np.pi**2 + 3.0) / 9.0,
            sigma_TU=0.0,
        ),
        closed_form_mle=False,
    )
)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def log_density(kernel: KernelFamily, y, params: LocScaleParams) -> np.ndarray:
    """log f(y; mu, sigma) = log f((y - mu)/sigma; 0, 1) - log sigma, vectorized."""
    if not (np.isfinite(params.sigma) and params.sigma > 0):
        raise DomainError(f"sigma must be positive, got {params.sigma!r}")
    z = (np.asarray(y, dtype=float) - params.mu) / params.sigma
    return kernel.log_density_std(z) - np.log(params.sigma)


def score(kernel: KernelFamily, y) -> tuple[np.ndarray, np.ndarray]:
    """Standardized score pair (T(y), U(y)) at (mu, sigma) = (0, 1)."""
    y = np.asarray(y, dtype=float)
    return kernel.score_location_std(y), kernel.score_scale_std(y)


def info_matrix(kernel: KernelFamily, abstol: float = 1e-10) -> InfoMatrix:
    """Covariance of (T, U) under the standardized density.

    Closed form when the family ships one; otherwise adaptive quadrature on the
    real line (tolerance `abstol` per entry).
    """
    if kernel.closed_info is not None:
        return kernel.closed_info

    def f(y):
        return np.exp(kernel.log_density_std(y))

    T = kernel.score_location_std
    U = kernel.score_scale_std
    sigma_T2 = integrate_line(lambda y: T(y) ** 2 * f(y), abstol=abstol)
    sigma_U2 = integrate_line(lambda y: U(y) ** 2 * f(y), abstol=abstol)
    sigma_TU = integrate_line(lambda y: T(y) * U(y) * f(y), abstol=abstol)
    return InfoMatrix(sigma_T2=sigma_T2, sigma_U2=sigma_U2, sigma_TU=sigma_TU)


def sample(
    kernel: KernelFamily, params: LocScaleParams, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n observations from f(.; mu, sigma)."""
    if n < 0:
        raise DomainError(f"sample size must be non-negative, got {n}")
    return params.mu + params.sigma * kernel.sample_std(rng, int(n))
