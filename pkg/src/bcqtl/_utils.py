"""Internal helpers: seeded RNG streams and quadrature on the real line."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import NumericalError

# Replicate streams are keyed by (seed, *path) through SeedSequence, so results
# never depend on how work is split across workers or chunks.


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for one replicate / chunk.

    Args:
        seed: experiment-level seed.
        path: integer coordinates identifying the replicate (index, namespace, ...).
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


# Namespaces used as the first path coordinate so different consumers of the
# same user-facing seed draw from disjoint streams.
NS_DATA = 0
NS_CALIBRATE = 1
NS_NULLDIST = 2
NS_PERMUTE = 3


_TANH_SCALE = 8.0  # y = scale * atanh(u): kills exponential-tail endpoint singularities


def integrate_line(
    fn: Callable[[np.ndarray], np.ndarray],
    center: float = 0.0,
    scale: float = 1.0,
    abstol: float = 1e-10,
) -> float:
    """Integrate fn over the whole real line by adaptive Gauss-Kronrod.

    Uses the substitution y = center + scale * S * atanh(u) (a tanh map), which
    turns exponential tails into smooth endpoint behavior. `center`/`scale`
    should roughly match where the integrand lives; (0, 1) is right for
    standardized densities.

    Raises:
        NumericalError: quadrature did not reach the requested tolerance.
    """
    s = float(scale) * _TANH_SCALE

    def transformed(u: float) -> float:
        y = center + s * np.arctanh(u)
        v = fn(np.asarray(y)) * (s / (1.0 - u * u))
        return float(v) if np.isfinite(v) else 0.0

    value, err = quad(transformed, -1.0, 1.0, epsabs=abstol, epsrel=1e-9, limit=200)
    if not np.isfinite(value) or err > max(abstol * 1e3, abs(value) * 1e-6 + 1e-9):
        raise NumericalError(f"quadrature failed: value={value!r}, abserr={err!r}")
    return float(value)


def haldane(d: float) -> float:
    """Map distance in centimorgans -> recombination fraction, no interference.

    r = (1 - exp(-2 d / 100)) / 2, strictly inside (0, 0.5) for d > 0.

    Raises:
        DomainError: d <= 0 or non-finite.
    """
    from .errors import DomainError

    if not (np.isfinite(d) and d > 0):
        raise DomainError(f"map distance must be positive and finite, got {d!r}")
    return 0.5 * (1.0 - np.exp(-2.0 * d / 100.0))


def pairsum(a: float, b: float, c: float, d: float) -> float:
    """Group-symmetric sum (a + d) + (b + c).

    Keeps totals bitwise invariant when the middle groups (2, 3) swap, or when
    the outer pair (1, 4) swaps together with the middle pair; IEEE addition is
    commutative, so only the association order has to be pinned.
    """
    return (a + d) + (b + c)
