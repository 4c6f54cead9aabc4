"""Maximum likelihood fits of the four-group mixture by profile-theta EM.

theta enters the likelihood only through the two recombinant groups, so the
fits profile it on a fixed uniform grid: for every grid value an EM run
maximizes over the component parameters, and the best grid point wins (ties
break toward the smallest theta). The EM is vectorized across the whole grid,
which is what keeps the simulation studies tractable: all grid points share
each (grid x observations) density evaluation.

Three models are fitted:

    null         one common (mu, sigma) for everything (no EM needed)
    equal_scale  two locations, one shared sigma
    full         two locations, two scales

Start values follow an anchored scheme (component 1 from the group-1 MLE,
component 2 from the group-4 MLE). To make the nesting chain
loglik(null) <= loglik(equal_scale) <= loglik(full) hold by construction and
not by luck, each constrained optimum also seeds the next model up: the
equal-scale fit runs a second EM pass started from the null parameters, and
the full fit runs a second pass started from the converged equal-scale
parameters at every grid point. EM ascent then carries the ordering through.

A sigma floor (sigma_floor_factor times the pooled median absolute deviation)
guards against components collapsing onto single points; fits that end on the
floor are flagged, not raised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

from .errors import DegenerateDataError, DomainError, ValidationError
from .kernels import KernelFamily, LocScaleParams
from .likelihood import MixtureParams, PhenotypeGroups, loglik as _loglik_public

__all__ = [
    "FitConfig",
    "MixtureFit",
    "theta_grid",
    "sigma_floor",
    "fit_null",
    "fit_equal_scale",
    "fit_full",
    "fit_all",
]

logger = logging.getLogger(__name__)

_NINF = -np.inf


# ---------------------------------------------------------------------------
# Configuration and result containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitConfig:
    """Tuning knobs of the profile EM; defaults match the reference protocol."""

    theta_grid_size: int = 101  # uniform grid on [0, 1]
    em_max_iter: int = 500  # per grid point
    em_tol: float = 1e-8  # absolute log-likelihood increment
    sigma_floor_factor: float = 1e-3  # floor = factor * pooled MAD

    def __post_init__(self):
        if self.theta_grid_size < 2:
            raise DomainError("theta_grid_size must be at least 2")
        if self.em_max_iter < 1:
            raise DomainError("em_max_iter must be at least 1")
        if not (self.em_tol > 0):
            raise DomainError("em_tol must be positive")
        if not (self.sigma_floor_factor > 0):
            raise DomainError("sigma_floor_factor must be positive")

    @classmethod
    def from_mapping(cls, mapping) -> "FitConfig":
        """Build from a parsed config section; unknown keys are an error."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ValidationError(f"unknown fit option(s): {', '.join(unknown)}")
        return cls(**{k: mapping[k] for k in mapping})


@dataclass(frozen=True)
class MixtureFit:
    """One fitted model.

    theta_profile holds (theta, profiled loglik) rows for the whole grid
    (empty for the null model). converged is False when the EM hit the
    iteration cap or the returned component sits on the sigma floor.
    """

    params: MixtureParams
    loglik: float
    model: str  # "null" | "equal_scale" | "full"
    converged: bool
    theta_profile: np.ndarray
    n_iter: int = 0  # EM iterations spent at the selected grid point

    @property
    def theta_hat(self) -> float:
        return self.params.theta


def theta_grid(size: int) -> np.ndarray:
    """Uniform profiling grid; grid[i] = i / (size - 1)."""
    if size < 2:
        raise DomainError("grid size must be at least 2")
    return np.arange(size, dtype=float) / (size - 1)


def sigma_floor(groups: PhenotypeGroups, cfg: Optional[FitConfig] = None) -> float:
    """Scale floor = sigma_floor_factor * pooled MAD.

    Falls back to the mean absolute deviation when the MAD degenerates to zero
    on tie-heavy data; a fully constant pooled sample is a degenerate-data
    error.
    """
    cfg = cfg or FitConfig()
    pooled = np.concatenate([groups.g1, groups.g2, groups.g3, groups.g4])
    med = float(np.median(pooled))
    mad = float(np.median(np.abs(pooled - med)))
    if mad == 0.0:
        mad = float(np.mean(np.abs(pooled - np.mean(pooled))))
    if mad == 0.0:
        raise DegenerateDataError("pooled sample is constant; nothing to fit")
    return cfg.sigma_floor_factor * mad


# ---------------------------------------------------------------------------
# Internal data carrier (phenotypes shifted by the pooled median)
# ---------------------------------------------------------------------------


class _Data(NamedTuple):
    y1: np.ndarray
    y2: np.ndarray
    y3: np.ndarray
    y4: np.ndarray
    y1sq: np.ndarray
    y2sq: np.ndarray
    y3sq: np.ndarray
    y4sq: np.ndarray
    shift: float


def _prepare(groups: PhenotypeGroups) -> _Data:
    pooled = np.concatenate([groups.g1, groups.g2, groups.g3, groups.g4])
    shift = float(np.median(pooled))
    y1 = groups.g1 - shift
    y2 = groups.g2 - shift
    y3 = groups.g3 - shift
    y4 = groups.g4 - shift
    return _Data(
        y1=y1,
        y2=y2,
        y3=y3,
        y4=y4,
        y1sq=y1 * y1,
        y2sq=y2 * y2,
        y3sq=y3 * y3,
        y4sq=y4 * y4,
        shift=shift,
    )


def _ld_grid(kernel: KernelFamily, y: np.ndarray, mu: np.ndarray, s: np.ndarray):
    """Log density matrix, shape (grid, len(y))."""
    if y.size == 0:
        return np.zeros((mu.size, 0))
    z = (y[None, :] - mu[:, None]) / s[:, None]
    return kernel.log_density_std(z) - np.log(s)[:, None]


# ---------------------------------------------------------------------------
# Weighted MLE M-steps
# ---------------------------------------------------------------------------
# A "part" is (y, w) with w either None (unit weights) or an (a, n) matrix.
# Per-part sums are combined as part0 + (part1 + part2) (4 parts: symmetric
# pairs), which together with IEEE commutativity keeps every accumulated
# total bitwise invariant under the group-swap symmetries.


def _combine(values: list):
    if len(values) == 1:
        return values[0]
    if len(values) == 2:
        return values[0] + values[1]
    if len(values) == 3:
        return values[0] + (values[1] + values[2])
    return (values[0] + values[3]) + (values[1] + values[2])


def _part_moments(parts) -> tuple:
    """(W, M, Q): weighted count, sum, sum of squares across parts."""
    Ws, Ms, Qs = [], [], []
    for y, ysq, w in parts:
        if y.size == 0:
            continue
        if w is None:
            Ws.append(float(y.size))
            Ms.append(float(np.sum(y)))
            Qs.append(float(np.sum(ysq)))
        else:
            Ws.append(w.sum(axis=1))
            Ms.append(w @ y)
            Qs.append(w @ ysq)
    return _combine(Ws), _combine(Ms), _combine(Qs)


def _newton_weighted_mle(
    kernel: KernelFamily,
    parts: list,
    mu0: np.ndarray,
    s0: np.ndarray,
    floor: float,
    max_iter: int = 15,
    tol: float = 1e-10,
):
    """Weighted location-scale MLE by damped Newton on the score equations.

    parts: list of (y, w) contributions, w None meaning unit weights.
    Vectorized over the leading axis of mu0/s0. Steps that fail to improve the
    weighted log-likelihood are halved (up to 6 times) and dropped if still
    failing, so the objective never decreases; sigma is projected onto
    [floor, inf).
    """
    mu = mu0.copy()
    s = np.maximum(s0, floor)

    def sums(m, sc):
        st_l, szt_l, A_l, B_l, E_l, W_l = [], [], [], [], [], []
        for y, w in parts:
            if y.size == 0:
                continue
            z = (y[None, :] - m[:, None]) / sc[:, None]
            T = kernel.score_location_std(z)
            Tp = kernel.dscore_location_std(z)
            zTp = z * Tp
            if w is None:
                st_l.append(T.sum(1))
                szt_l.append((z * T).sum(1))
                A_l.append(Tp.sum(1))
                B_l.append(zTp.sum(1))
                E_l.append((z * zTp).sum(1))
                W_l.append(float(y.size))
            else:
                st_l.append((w * T).sum(1))
                szt_l.append((w * (z * T)).sum(1))
                A_l.append((w * Tp).sum(1))
                B_l.append((w * zTp).sum(1))
                E_l.append((w * (z * zTp)).sum(1))
                W_l.append(w.sum(1))
        return (
            _combine(st_l),
            _combine(szt_l),
            _combine(A_l),
            _combine(B_l),
            _combine(E_l),
            _combine(W_l),
        )

    def objective(m, sc):
        vals = []
        logsc = np.log(sc)
        for y, w in parts:
            if y.size == 0:
                continue
            z = (y[None, :] - m[:, None]) / sc[:, None]
            ld = kernel.log_density_std(z)
            if w is None:
                vals.append(ld.sum(1) - y.size * logsc)
            else:
                vals.append((w * ld).sum(1) - w.sum(1) * logsc)
        return _combine(vals)

    obj = objective(mu, s)
    for _ in range(max_iter):
        st, szt, A, B, E, W = sums(mu, s)
        su = szt - W
        # K = [[A, B], [st + B, szt + E]]; delta = s * K^-1 (st, su)
        C = st + B
        D = szt + E
        det = A * D - B * C
        ok = np.abs(det) > 1e-300
        inv_det = np.where(ok, det, 1.0)
        dmu = s * (D * st - B * su) / inv_det
        ds = s * (-C * st + A * su) / inv_det
        dmu = np.where(ok, dmu, 0.0)
        ds = np.where(ok, ds, 0.0)

        step = np.ones_like(mu)
        mu_c = mu + dmu
        s_c = np.maximum(s + ds, floor)
        obj_c = objective(mu_c, s_c)
        worse = obj_c < obj
        for _ in range(6):
            if not np.any(worse):
                break
            step[worse] *= 0.5
            mu_c = np.where(worse, mu + step * dmu, mu_c)
            s_c = np.where(worse, np.maximum(s + step * ds, floor), s_c)
            obj_c = objective(mu_c, s_c)
            worse = obj_c < obj
        # drop any still-failing step
        mu_c = np.where(worse, mu, mu_c)
        s_c = np.where(worse, s, s_c)
        obj_c = np.where(worse, obj, obj_c)

        moved = (np.abs(mu_c - mu) > tol * (1.0 + np.abs(mu))) | (
            np.abs(s_c - s) > tol * s
        )
        mu, s, obj = mu_c, s_c, obj_c
        if not np.any(moved):
            break
    return mu, s


def _newton_weighted_mle_shared(
    kernel: KernelFamily,
    parts1: list,
    parts2: list,
    mu1_0: np.ndarray,
    mu2_0: np.ndarray,
    s0: np.ndarray,
    floor: float,
    max_iter: int = 15,
    tol: float = 1e-10,
):
    """Two locations, one shared sigma: 3-parameter damped Newton, batched."""
    mu1 = mu1_0.copy()
    mu2 = mu2_0.copy()
    s = np.maximum(s0, floor)

    def comp_sums(parts, m, sc):
        st_l, szt_l, A_l, B_l, E_l, W_l = [], [], [], [], [], []
        for y, w in parts:
            if y.size == 0:
                continue
            z = (y[None, :] - m[:, None]) / sc[:, None]
            T = kernel.score_location_std(z)
            Tp = kernel.dscore_location_std(z)
            zTp = z * Tp
            if w is None:
                st_l.append(T.sum(1))
                szt_l.append((z * T).sum(1))
                A_l.append(Tp.sum(1))
                B_l.append(zTp.sum(1))
                E_l.append((z * zTp).sum(1))
                W_l.append(float(y.size))
            else:
                st_l.append((w * T).sum(1))
                szt_l.append((w * (z * T)).sum(1))
                A_l.append((w * Tp).sum(1))
                B_l.append((w * zTp).sum(1))
                E_l.append((w * (z * zTp)).sum(1))
                W_l.append(w.sum(1))
        return (
            _combine(st_l),
            _combine(szt_l),
            _combine(A_l),
            _combine(B_l),
            _combine(E_l),
            _combine(W_l),
        )

    def comp_objective(parts, m, sc):
        vals = []
        logsc = np.log(sc)
        for y, w in parts:
            if y.size == 0:
                continue
            z = (y[None, :] - m[:, None]) / sc[:, None]
            ld = kernel.log_density_std(z)
            if w is None:
                vals.append(ld.sum(1) - y.size * logsc)
            else:
                vals.append((w * ld).sum(1) - w.sum(1) * logsc)
        return _combine(vals)

    def objective(m1, m2, sc):
        return comp_objective(parts1, m1, sc) + comp_objective(parts2, m2, sc)

    G = mu1.size
    obj = objective(mu1, mu2, s)
    for _ in range(max_iter):
        st1, szt1, A1, B1, E1, W1 = comp_sums(parts1, mu1, s)
        st2, szt2, A2, B2, E2, W2 = comp_sums(parts2, mu2, s)
        su = (szt1 - W1) + (szt2 - W2)
        K = np.zeros((G, 3, 3))
        K[:, 0, 0] = A1
        K[:, 0, 2] = B1
        K[:, 1, 1] = A2
        K[:, 1, 2] = B2
        K[:, 2, 0] = st1 + B1
        K[:, 2, 1] = st2 + B2
        K[:, 2, 2] = (szt1 + E1) + (szt2 + E2)
        F = np.stack([st1, st2, su], axis=1)
        det = np.linalg.det(K)
        ok = np.abs(det) > 1e-300
        delta = np.zeros((G, 3))
        if np.any(ok):
            # numpy 2.x solve wants an explicit vector axis on b
            delta[ok] = np.linalg.solve(K[ok], F[ok][..., None])[..., 0]
        delta *= s[:, None]

        step = np.ones(G)
        m1_c = mu1 + delta[:, 0]
        m2_c = mu2 + delta[:, 1]
        s_c = np.maximum(s + delta[:, 2], floor)
        obj_c = objective(m1_c, m2_c, s_c)
        worse = obj_c < obj
        for _ in range(6):
            if not np.any(worse):
                break
            step[worse] *= 0.5
            m1_c = np.where(worse, mu1 + step * delta[:, 0], m1_c)
            m2_c = np.where(worse, mu2 + step * delta[:, 1], m2_c)
            s_c = np.where(worse, np.maximum(s + step * delta[:, 2], floor), s_c)
            obj_c = objective(m1_c, m2_c, s_c)
            worse = obj_c < obj
        m1_c = np.where(worse, mu1, m1_c)
        m2_c = np.where(worse, mu2, m2_c)
        s_c = np.where(worse, s, s_c)
        obj_c = np.where(worse, obj, obj_c)

        moved = (
            (np.abs(m1_c - mu1) > tol * (1.0 + np.abs(mu1)))
            | (np.abs(m2_c - mu2) > tol * (1.0 + np.abs(mu2)))
            | (np.abs(s_c - s) > tol * s)
        )
        mu1, mu2, s, obj = m1_c, m2_c, s_c, obj_c
        if not np.any(moved):
            break
    return mu1, mu2, s


# ---------------------------------------------------------------------------
# The grid EM engine
# ---------------------------------------------------------------------------


class _GridFit(NamedTuple):
    mu1: np.ndarray
    s1: np.ndarray
    mu2: np.ndarray
    s2: np.ndarray
    ll: np.ndarray
    converged: np.ndarray
    floored: np.ndarray
    iters: np.ndarray


def _profile_em(
    data: _Data,
    kernel: KernelFamily,
    cfg: FitConfig,
    floor: float,
    shared_scale: bool,
    mu1: np.ndarray,
    s1: np.ndarray,
    mu2: np.ndarray,
    s2: np.ndarray,
    trace: Optional[list] = None,
) -> _GridFit:
    """EM to convergence at every grid theta, vectorized across the grid.

    When `trace` is a list, the per-iteration log-likelihood vector (full
    grid) is appended each iteration; parameters of already-converged points
    stay frozen either way.
    """
    G = cfg.theta_grid_size
    grid = theta_grid(G)
    logt = np.full(G, _NINF)
    np.log(grid[1:], out=logt[1:])
    log1mt = logt[::-1].copy()  # exact mirror: log(1 - theta_i) = logt reversed

    mu1 = mu1.copy()
    s1 = np.maximum(s1, floor)
    mu2 = mu2.copy()
    s2 = s1 if shared_scale else np.maximum(s2, floor)

    ll_prev = np.full(G, _NINF)
    converged = np.zeros(G, dtype=bool)
    floored = np.zeros(G, dtype=bool)
    iters = np.zeros(G, dtype=int)
    active = np.arange(G)

    for _ in range(cfg.em_max_iter):
        # In trace mode evaluate everywhere, so the recorded path covers the
        # full grid; converged points are frozen so their value is constant.
        a = active if trace is None else np.arange(G)
        m1a, s1a, m2a, s2a = mu1[a], s1[a], mu2[a], s2[a]

        # E-step quantities and the current log-likelihood in one pass
        l1 = _ld_grid(kernel, data.y1, m1a, s1a).sum(axis=1)
        l4 = _ld_grid(kernel, data.y4, m2a, s2a).sum(axis=1)
        lw2a = logt[a][:, None] + _ld_grid(kernel, data.y2, m1a, s1a)
        lw2b = log1mt[a][:, None] + _ld_grid(kernel, data.y2, m2a, s2a)
        den2 = np.logaddexp(lw2a, lw2b)
        lw3a = log1mt[a][:, None] + _ld_grid(kernel, data.y3, m1a, s1a)
        lw3b = logt[a][:, None] + _ld_grid(kernel, data.y3, m2a, s2a)
        den3 = np.logaddexp(lw3a, lw3b)
        ll_now = (l1 + l4) + (den2.sum(axis=1) + den3.sum(axis=1))

        if trace is not None:
            trace.append(ll_now.copy())

        conv_mask = (np.abs(ll_now - ll_prev[a]) < cfg.em_tol) & ~converged[a]
        ll_prev[a] = np.where(converged[a], ll_prev[a], ll_now)
        converged[a[conv_mask]] = True

        still = ~converged[a]
        if not np.any(still):
            break
        upd = a[still]
        iters[upd] += 1

        # posterior weights for the recombinant groups (both sides formed the
        # same way, so the swap symmetries stay bitwise)
        w2 = np.exp(lw2a[still] - den2[still])
        v2 = np.exp(lw2b[still] - den2[still])
        w3 = np.exp(lw3a[still] - den3[still])
        v3 = np.exp(lw3b[still] - den3[still])

        if kernel.closed_form_mle:
            W1, M1, Q1 = _part_moments(
                [
                    (data.y1, data.y1sq, None),
                    (data.y2, data.y2sq, w2),
                    (data.y3, data.y3sq, w3),
                ]
            )
            W2, M2, Q2 = _part_moments(
                [
                    (data.y4, data.y4sq, None),
                    (data.y2, data.y2sq, v2),
                    (data.y3, data.y3sq, v3),
                ]
            )
            m1n = M1 / W1
            m2n = M2 / W2
            if shared_scale:
                ssq = ((Q1 - W1 * m1n**2) + (Q2 - W2 * m2n**2)) / (W1 + W2)
                sn = np.sqrt(np.maximum(ssq, 0.0))
                sn = np.maximum(sn, floor)
                mu1[upd], mu2[upd] = m1n, m2n
                s1[upd] = sn
                s2 = s1
                floored[upd] = sn <= floor
            else:
                v1n = np.maximum(Q1 / W1 - m1n**2, 0.0)
                v2n = np.maximum(Q2 / W2 - m2n**2, 0.0)
                s1n = np.maximum(np.sqrt(v1n), floor)
                s2n = np.maximum(np.sqrt(v2n), floor)
                mu1[upd], mu2[upd] = m1n, m2n
                s1[upd], s2[upd] = s1n, s2n
                floored[upd] = (s1n <= floor) | (s2n <= floor)
        else:
            parts1 = [(data.y1, None), (data.y2, w2), (data.y3, w3)]
            parts2 = [(data.y4, None), (data.y2, v2), (data.y3, v3)]
            # generalized EM: one guarded Newton step per M-step is enough,
            # the warm start from the previous iteration does the rest
            if shared_scale:
                m1n, m2n, sn = _newton_weighted_mle_shared(
                    kernel, parts1, parts2, mu1[upd], mu2[upd], s1[upd], floor,
                    max_iter=1,
                )
                mu1[upd], mu2[upd] = m1n, m2n
                s1[upd] = sn
                s2 = s1
                floored[upd] = sn <= floor
            else:
                m1n, s1n = _newton_weighted_mle(
                    kernel, parts1, mu1[upd], s1[upd], floor, max_iter=1
                )
                m2n, s2n = _newton_weighted_mle(
                    kernel, parts2, mu2[upd], s2[upd], floor, max_iter=1
                )
                mu1[upd], s1[upd] = m1n, s1n
                mu2[upd], s2[upd] = m2n, s2n
                floored[upd] = (s1n <= floor) | (s2n <= floor)

        active = np.flatnonzero(~converged)

    # final log-likelihood at the final parameters, full grid
    l1 = _ld_grid(kernel, data.y1, mu1, s1).sum(axis=1)
    l4 = _ld_grid(kernel, data.y4, mu2, s2).sum(axis=1)
    den2 = np.logaddexp(
        logt[:, None] + _ld_grid(kernel, data.y2, mu1, s1),
        log1mt[:, None] + _ld_grid(kernel, data.y2, mu2, s2),
    )
    den3 = np.logaddexp(
        log1mt[:, None] + _ld_grid(kernel, data.y3, mu1, s1),
        logt[:, None] + _ld_grid(kernel, data.y3, mu2, s2),
    )
    ll = (l1 + l4) + (den2.sum(axis=1) + den3.sum(axis=1))
    return _GridFit(mu1, s1, mu2, s2 if not shared_scale else s1, ll, converged, floored, iters)


def _merge(best: _GridFit, other: _GridFit) -> _GridFit:
    """Per-grid-point pick of the higher log-likelihood (first wins ties)."""
    take = other.ll > best.ll
    pick = lambda b, o: np.where(take, o, b)  # noqa: E731
    return _GridFit(
        pick(best.mu1, other.mu1),
        pick(best.s1, other.s1),
        pick(best.mu2, other.mu2),
        pick(best.s2, other.s2),
        pick(best.ll, other.ll),
        pick(best.converged, other.converged),
        pick(best.floored, other.floored),
        pick(best.iters, other.iters),
    )


# ---------------------------------------------------------------------------
# Single-sample MLE (anchored starts and the null fit)
# ---------------------------------------------------------------------------


def _mle_single(kernel: KernelFamily, y: np.ndarray, floor: float) -> tuple:
    """Unweighted location-scale MLE of one sample, floored."""
    m = float(np.mean(y))
    sd = float(np.sqrt(np.mean((y - m) ** 2)))
    if kernel.closed_form_mle:
        return m, max(sd, floor)
    s0 = max(sd / kernel.std_sd, floor)
    mu, s = _newton_weighted_mle(
        kernel, [(y, None)], np.array([m]), np.array([s0]), floor, max_iter=40
    )
    return float(mu[0]), float(s[0])


def fit_null(
    groups: PhenotypeGroups,
    kernel: KernelFamily,
    cfg: Optional[FitConfig] = None,
) -> MixtureFit:
    """Pooled single-density MLE (the no-effect model).

    Raises:
        DegenerateDataError: pooled sample is constant.
    """
    cfg = cfg or FitConfig()
    floor = sigma_floor(groups, cfg)  # also rejects constant samples
    data = _prepare(groups)
    n = groups.n

    ys = (data.y1, data.y2, data.y3, data.y4)
    total = _combine([float(np.sum(y)) for y in ys])
    mean = total / n
    if kernel.closed_form_mle:
        ssq = _combine([float(np.sum((y - mean) ** 2)) for y in ys])
        var = ssq / n
        if var <= 0.0:
            raise DegenerateDataError("pooled sample is constant; nothing to fit")
        mu_hat, s_hat = mean, float(np.sqrt(var))
        n_iter = 0
    else:
        sd = float(np.sqrt(_combine([float(np.sum((y - mean) ** 2)) for y in ys]) / n))
        parts = [(y, None) for y in ys if y.size]
        mu, s = _newton_weighted_mle(
            kernel,
            parts,
            np.array([mean]),
            np.array([max(sd / kernel.std_sd, floor)]),
            floor,
            max_iter=60,
        )
        mu_hat, s_hat = float(mu[0]), float(s[0])
        n_iter = 1

    p0 = LocScaleParams(mu=mu_hat + data.shift, sigma=s_hat)
    params = MixtureParams(theta=0.5, comp1=p0, comp2=p0)
    ll = _loglik_public(groups, kernel, params)
    return MixtureFit(
        params=params,
        loglik=ll,
        model="null",
        converged=True,
        theta_profile=np.empty((0, 2)),
        n_iter=n_iter,
    )


# ---------------------------------------------------------------------------
# Grid fit drivers
# ---------------------------------------------------------------------------


def _require_fittable(groups: PhenotypeGroups):
    if groups.n1 < 2 or groups.n4 < 2:
        raise DegenerateDataError(
            f"anchor groups need at least 2 observations each "
            f"(n1={groups.n1}, n4={groups.n4})"
        )


def _anchored_init(data, kernel, floor, G, shared_scale):
    m1, sd1 = _mle_single(kernel, data.y1, floor)
    m2, sd2 = _mle_single(kernel, data.y4, floor)
    if shared_scale:
        n1, n4 = data.y1.size, data.y4.size
        sd = float(np.sqrt((n1 * sd1**2 + n4 * sd2**2) / (n1 + n4)))
        sd1 = sd2 = max(sd, floor)
    ones = np.ones(G)
    return ones * m1, ones * sd1, ones * m2, ones * sd2


def _equal_scale_grid(data, kernel, cfg, floor, null_mu, null_s):
    G = cfg.theta_grid_size
    run = _profile_em(
        data, kernel, cfg, floor, True, *_anchored_init(data, kernel, floor, G, True)
    )
    ones = np.ones(G)
    run_null = _profile_em(
        data, kernel, cfg, floor, True,
        ones * null_mu, ones * null_s, ones * null_mu, ones * null_s,
    )
    return _merge(run, run_null)


def _assemble(model, grid_fit, data, groups, kernel, cfg, null_fit):
    grid = theta_grid(cfg.theta_grid_size)
    best = int(np.argmax(grid_fit.ll))  # first max = smallest theta on ties
    params = MixtureParams(
        theta=float(grid[best]),
        comp1=LocScaleParams(
            mu=float(grid_fit.mu1[best] + data.shift), sigma=float(grid_fit.s1[best])
        ),
        comp2=LocScaleParams(
            mu=float(grid_fit.mu2[best] + data.shift), sigma=float(grid_fit.s2[best])
        ),
    )
    ll = _loglik_public(groups, kernel, params)
    converged = bool(grid_fit.converged[best]) and not bool(grid_fit.floored[best])
    if ll < null_fit.loglik:
        # Defensive: the null point is feasible in every model, so a fit below
        # it can only be a numerical artifact. Fall back to the null point.
        logger.warning(
            "%s fit fell below the null log-likelihood by %.3g; using null point",
            model,
            null_fit.loglik - ll,
        )
        params = MixtureParams(
            theta=0.0, comp1=null_fit.params.comp1, comp2=null_fit.params.comp2
        )
        ll = null_fit.loglik
        converged = True
    profile = np.column_stack([grid, grid_fit.ll])
    profile.setflags(write=False)
    if np.all(grid_fit.floored):
        converged = False
        logger.warning("%s fit hit the sigma floor at every grid point", model)
    return MixtureFit(
        params=params,
        loglik=ll,
        model=model,
        converged=converged,
        theta_profile=profile,
        n_iter=int(grid_fit.iters[best]),
    )


def fit_equal_scale(
    groups: PhenotypeGroups,
    kernel: KernelFamily,
    cfg: Optional[FitConfig] = None,
) -> MixtureFit:
    """Two-location, shared-scale fit, theta profiled on the grid.

    Raises:
        DegenerateDataError: n1 < 2 or n4 < 2, or constant pooled sample.
    """
    cfg = cfg or FitConfig()
    _require_fittable(groups)
    null_fit = fit_null(groups, kernel, cfg)
    floor = sigma_floor(groups, cfg)
    data = _prepare(groups)
    eq = _equal_scale_grid(
        data, kernel, cfg, floor,
        null_fit.params.comp1.mu - data.shift, null_fit.params.comp1.sigma,
    )
    return _assemble("equal_scale", eq, data, groups, kernel, cfg, null_fit)


def fit_full(
    groups: PhenotypeGroups,
    kernel: KernelFamily,
    cfg: Optional[FitConfig] = None,
) -> MixtureFit:
    """Two-location, two-scale fit, theta profiled on the grid.

    Seeds a second EM pass from the converged equal-scale parameters at every
    grid point, so its profiled log-likelihood dominates the equal-scale one.

    Raises:
        DegenerateDataError: n1 < 2 or n4 < 2, or constant pooled sample.
    """
    _, _, full = fit_all(groups, kernel, cfg)
    return full


def fit_all(
    groups: PhenotypeGroups,
    kernel: KernelFamily,
    cfg: Optional[FitConfig] = None,
) -> tuple[MixtureFit, MixtureFit, MixtureFit]:
    """(null, equal_scale, full) fits sharing the intermediate grid work."""
    cfg = cfg or FitConfig()
    _require_fittable(groups)
    null_fit = fit_null(groups, kernel, cfg)
    floor = sigma_floor(groups, cfg)
    data = _prepare(groups)
    G = cfg.theta_grid_size

    eq = _equal_scale_grid(
        data, kernel, cfg, floor,
        null_fit.params.comp1.mu - data.shift, null_fit.params.comp1.sigma,
    )
    eq_fit = _assemble("equal_scale", eq, data, groups, kernel, cfg, null_fit)

    run_a = _profile_em(
        data, kernel, cfg, floor, False, *_anchored_init(data, kernel, floor, G, False)
    )
    run_seeded = _profile_em(
        data, kernel, cfg, floor, False,
        eq.mu1.copy(), eq.s1.copy(), eq.mu2.copy(), eq.s2.copy(),
    )
    full = _merge(run_a, run_seeded)
    full_fit = _assemble("full", full, data, groups, kernel, cfg, null_fit)
    return null_fit, eq_fit, full_fit


def _em_trace(
    groups: PhenotypeGroups,
    kernel: KernelFamily,
    cfg: Optional[FitConfig] = None,
    shared_scale: bool = False,
) -> list:
    """Per-iteration profiled log-likelihood vectors of the anchored EM run.

    Test hook for the ascent property; runs the same engine as the fits.
    """
    cfg = cfg or FitConfig()
    _require_fittable(groups)
    floor = sigma_floor(groups, cfg)
    data = _prepare(groups)
    trace: list = []
    _profile_em(
        data, kernel, cfg, floor, shared_scale,
        *_anchored_init(data, kernel, floor, cfg.theta_grid_size, shared_scale),
        trace=trace,
    )
    return trace
