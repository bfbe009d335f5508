"""Tangent-point energies, their kernels, and the tangent-field reformulation.

All double integrals use the product trapezoid rule on the uniform grid
(weight 1/n^2 per ordered pair) with only the diagonal i = j removed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._parallel import block_size, map_blocks, row_blocks
from .curve_core import (
    ArcSums,
    Curve,
    CurveError,
    EnergyParams,
    Interval,
    TangentField,
    derivative,
    param_index,
    resample,
    shortest_arc,
    tangent_field,
)

log = logging.getLogger(__name__)

COINCIDENT = 1e-14
CLAMP_WARN_FRACTION = 1e-3


@dataclass(frozen=True)
class EnergyValue:
    value: float
    params: EnergyParams
    n: int
    quadrature: str = "product-trapezoid"
    infinite: bool = False
    clamped_pairs: int = 0

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class MuKernelSample:
    x: float
    y: float
    value: float


def _unit_and_speed(tangents: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    speed = np.linalg.norm(tangents, axis=1)
    unit = np.divide(tangents, speed[:, None], out=np.zeros_like(tangents), where=speed[:, None] > 0)
    return unit, speed


def tp_integrand_block(points: np.ndarray, tangents: np.ndarray, rows: np.ndarray,
                       cols: np.ndarray, p: float, q: float) -> tuple[np.ndarray, bool]:
    """Integrand of TP^{p,q} for the pairs rows x cols (without the 1/n^2 weight).

    Written as |T_x| |T_x/|T_x| ^ D|^q |T_y| / |D|^p with D = gamma(x) - gamma(y),
    which equals the usual |T_x ^ D|^q |T_x|^{1-q} |T_y| / |D|^p and stays finite
    where the discrete derivative vanishes. Diagonal entries are zero.
    """
    unit, speed = _unit_and_speed(tangents)
    delta = points[rows][:, None, :] - points[cols][None, :, :]
    dist = np.linalg.norm(delta, axis=2)
    wedge = np.linalg.norm(np.cross(unit[rows][:, None, :], delta), axis=2)
    offdiag = rows[:, None] != cols[None, :]
    close = offdiag & (dist < COINCIDENT)
    infinite = bool(np.any(close & (wedge > 0.0)))
    safe = offdiag & ~close
    vals = np.zeros_like(dist)
    vals[safe] = wedge[safe] ** q / dist[safe] ** p
    vals *= speed[rows][:, None] * speed[cols][None, :]
    return vals, infinite


def tp_row_sums(c: Curve, params: EnergyParams, cols: np.ndarray | None = None,
                tangents: np.ndarray | None = None) -> tuple[np.ndarray, bool]:
    """Per-row contributions sum_j w_ij / n^2 for every row i (columns restricted to ``cols``)."""
    n = c.n
    T = derivative(c) if tangents is None else tangents
    rows_all = np.arange(n)
    cols = rows_all if cols is None else np.asarray(cols)

    def block(a, b):
        vals, inf = tp_integrand_block(c.points, T, rows_all[a:b], cols, params.p, params.q)
        return vals.sum(axis=1), inf

    parts = map_blocks(block, row_blocks(n, block_size(cols.size)))
    sums = np.concatenate([s for s, _ in parts]) / (n * n)
    return sums, any(inf for _, inf in parts)


def tp_energy(c: Curve, params: EnergyParams) -> EnergyValue:
    """Discrete TP^{p,q}(gamma)."""
    sums, infinite = tp_row_sums(c, params)
    value = np.inf if infinite else float(np.sum(sums))
    return EnergyValue(value, params, c.n, infinite=infinite)


def tp_energy_local(c: Curve, A: Interval | None, params: EnergyParams, mode: str = "aa") -> EnergyValue:
    """Localized energy over A x A (``aa``) or A x R/Z (``ahalf``).

    ``A=None`` means the whole circle, in which case both modes give tp_energy.
    """
    if mode not in ("aa", "ahalf"):
        raise ValueError("mode must be 'aa' or 'ahalf'")
    n = c.n
    idx = np.arange(n) if A is None else A.indices(n)
    cols = idx if (mode == "aa" and A is not None) else None
    sums, infinite = tp_row_sums(c, params, cols=cols)
    value = np.inf if infinite else float(np.sum(sums[np.sort(idx)]))
    return EnergyValue(value, params, n, infinite=infinite)


def tangent_point_radius(c: Curve, x: float, y: float) -> float:
    """R_t(x, y) = |D|^2 / (2 |T_x/|T_x| ^ D|), +inf for collinear configurations."""
    n = c.n
    i, j = param_index(x, n), param_index(y, n)
    if i == j:
        raise ValueError("x and y fall on the same sample")
    T = derivative(c)[i]
    delta = c.points[i] - c.points[j]
    dist2 = float(delta @ delta)
    if dist2 < COINCIDENT ** 2:
        raise CurveError("degenerate pair: coincident points")
    wedge = float(np.linalg.norm(np.cross(T / np.linalg.norm(T), delta)))
    if wedge == 0.0:
        return np.inf
    return dist2 / (2.0 * wedge)


def tangent_point_radii(c: Curve) -> np.ndarray:
    """R_t for all off-diagonal sample pairs (diagonal set to nan)."""
    n = c.n
    unit, _ = _unit_and_speed(derivative(c))
    delta = c.points[:, None, :] - c.points[None, :, :]
    dist2 = np.sum(delta * delta, axis=2)
    wedge = np.linalg.norm(np.cross(unit[:, None, :], delta), axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        radii = dist2 / (2.0 * wedge)
    radii[np.arange(n), np.arange(n)] = np.nan
    return radii


def mu_kernel(c: Curve, x: float, y: float, q: float) -> MuKernelSample:
    """mu(gamma, x, y): the TP integrand with exponent p = q + 2."""
    n = c.n
    i, j = param_index(x, n), param_index(y, n)
    if i == j:
        raise ValueError("x and y fall on the same sample")
    vals, infinite = tp_integrand_block(c.points, derivative(c), np.array([i]), np.array([j]), q + 2.0, q)
    if infinite or np.linalg.norm(c.points[i] - c.points[j]) < COINCIDENT:
        raise CurveError("degenerate pair: coincident points")
    return MuKernelSample(i / n, j / n, float(vals[0, 0]))


def k_factor(u: TangentField | np.ndarray, x: float, y: float) -> float:
    """k(x, y) = 1 - 1/2 of the double arc average of |u(s) - u(t)|^2.

    Evaluated as an explicit double sum with trapezoid weights over the shortest
    arc; antipodal pairs use the arc running forward from x.
    """
    vec = u.vectors if isinstance(u, TangentField) else np.asarray(u, dtype=float)
    n = vec.shape[0]
    i, j = param_index(x, n), param_index(y, n)
    if i == j:
        raise ValueError("x and y fall on the same sample")
    start, steps = shortest_arc(i, j, n)
    start, steps = int(start), int(steps)
    idx = np.arange(start, start + steps + 1) % n
    w = np.ones(idx.size)
    w[0] = w[-1] = 0.5
    w /= steps
    g = vec[idx]
    diff = g[:, None, :] - g[None, :, :]
    c = float(np.sum(w[:, None] * w[None, :] * np.sum(diff * diff, axis=2)))
    return 1.0 - 0.5 * c


@dataclass
class _FieldAverages:
    """Prefix sums shared by the tangent-field energy and its first variation."""

    u: np.ndarray
    eta: np.ndarray
    mean: np.ndarray
    arc_u: ArcSums = field(init=False)
    arc_u2: ArcSums = field(init=False)
    arc_eta_u: ArcSums = field(init=False)
    arc_eta2: ArcSums = field(init=False)

    def __post_init__(self) -> None:
        self.arc_u = ArcSums(self.u)
        self.arc_u2 = ArcSums(np.sum(self.u * self.u, axis=1))
        self.arc_eta_u = ArcSums(self.eta[:, None] * self.u)
        self.arc_eta2 = ArcSums(self.eta * self.eta)

    def pair_terms(self, rows: np.ndarray) -> dict:
        """a, b, c, d, e, f and rho for rows x all columns (diagonal masked by rho = 0)."""
        u, eta, m = self.u, self.eta, self.mean
        n = u.shape[0]
        i = rows[:, None]
        j = np.arange(n)[None, :]
        start, steps = shortest_arc(i, j, n)
        avg_u = self.arc_u.mean(start, steps)
        avg_u2 = self.arc_u2.mean(start, steps)
        avg_eta_u = self.arc_eta_u.mean(start, steps)
        avg_eta2 = self.arc_eta2.mean(start, steps)
        ux = u[rows][:, None, :]
        diff = avg_u - ux
        a = np.sum(diff * diff, axis=2)
        b = avg_u2 - 2.0 * np.sum(ux * avg_u, axis=2) + np.sum(ux * ux, axis=2)
        c = 2.0 * (avg_u2 - np.sum(avg_u * avg_u, axis=2))
        d = avg_u2 - 2.0 * (avg_eta_u @ m) + (m @ m) * avg_eta2
        shifted = u - eta[:, None] * m
        e = np.linalg.norm(shifted, axis=1)
        return {
            "start": start, "steps": steps, "rho": steps / n,
            "avg_u": avg_u, "avg_eta_u": avg_eta_u,
            "a": a, "b": b, "c": c, "d": d,
            "e": np.broadcast_to(e[rows][:, None], a.shape),
            "f": np.broadcast_to(e[None, :], a.shape),
        }


def _field_inputs(u, eta, mean_u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    vec = u.vectors if isinstance(u, TangentField) else np.asarray(u, dtype=float)
    n = vec.shape[0]
    eta_arr = np.zeros(n) if eta is None else np.asarray(eta, dtype=float)
    if eta_arr.shape != (n,):
        raise ValueError("eta must have one sample per grid point")
    if np.any(eta_arr < 0.0):
        raise ValueError("eta must be nonnegative")
    m = vec.mean(axis=0) if mean_u is None else np.asarray(mean_u, dtype=float)
    return vec, eta_arr, m


def e_energy(u: TangentField | np.ndarray, params: EnergyParams, eta: np.ndarray | None = None,
             mean_u: np.ndarray | None = None) -> EnergyValue:
    """The tangent-field energy E^{p,q}_eta(u) (plain E^{p,q} when eta is omitted).

    Arc averages use the trapezoid rule on the grid samples of the shortest arc.
    A negative radicand e^2 a - (b + e^2 - d)^2 / 4 is set to zero; values below
    -1e-12 (relative) are counted in ``clamped_pairs`` and a warning is logged
    when they exceed 0.1% of all pairs.
    """
    vec, eta_arr, m = _field_inputs(u, eta, mean_u)
    n = vec.shape[0]
    p, q = params.p, params.q
    avgs = _FieldAverages(vec, eta_arr, m)

    def block(lo, hi):
        t = avgs.pair_terms(np.arange(lo, hi))
        e2 = t["e"] ** 2
        radicand = e2 * t["a"] - 0.25 * (t["b"] + e2 - t["d"]) ** 2
        kfac = t["d"] - 0.5 * t["c"]
        offdiag = t["steps"] > 0
        clamped = int(np.sum(offdiag & (radicand < -1e-12 * e2 * np.abs(t["d"]))))
        radicand = np.maximum(radicand, 0.0)
        bad = offdiag & (kfac <= 0.0)
        vals = np.zeros_like(radicand)
        ok = offdiag & ~bad
        with np.errstate(divide="ignore"):
            vals[ok] = (radicand[ok] ** (q / 2.0) * kfac[ok] ** (-p / 2.0)
                        * t["e"][ok] ** (1.0 - q) * t["f"][ok] * t["rho"][ok] ** (q - p))
        return vals.sum(axis=1), clamped, bool(np.any(bad))

    parts = map_blocks(block, row_blocks(n, block_size(n, 1 << 19)))
    clamped = sum(cl for _, cl, _ in parts)
    infinite = any(bad for _, _, bad in parts)
    total = float(np.sum(np.concatenate([s for s, _, _ in parts]))) / (n * n)
    pairs = n * (n - 1)
    if clamped > CLAMP_WARN_FRACTION * pairs:
        log.warning("radicand clamped on %d of %d pairs: arc quadrature under-resolved", clamped, pairs)
    return EnergyValue(np.inf if infinite else total, params, n, quadrature="product-trapezoid/arc-trapezoid",
                       infinite=infinite, clamped_pairs=clamped)


def tp_equals_e_check(c: Curve, params: EnergyParams, speed_tol: float = 1e-8) -> float:
    """|TP(gamma) - E(gamma'/|gamma'|)| / TP(gamma) for a constant-speed curve.

    The curve is first scaled to unit length, which multiplies TP by L^{p-q-2}
    for a curve of constant speed L.
    """
    chords = np.linalg.norm(c.edges(), axis=1)
    if np.max(np.abs(chords - chords.mean())) > speed_tol * chords.mean():
        raise CurveError("curve is not parametrized with constant speed")
    speed = float(np.mean(np.linalg.norm(derivative(c), axis=1)))
    tp = tp_energy(c, params).value * speed ** (params.p - params.q - 2.0)
    e = e_energy(tangent_field(c), params).value
    return abs(tp - e) / tp


def refinement_table(c: Curve, params: EnergyParams, levels: int) -> list[dict]:
    """TP on the spline-resampled curve at n, 2n, ..., 2^levels n."""
    rows = []
    for level in range(levels + 1):
        cur = c if level == 0 else resample(c, c.n * 2 ** level)
        rows.append({"n": cur.n, "value": tp_energy(cur, params).value})
    return rows
