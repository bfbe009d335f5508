"""Gagliardo seminorms and the comparison functionals built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import block_size, map_blocks, row_blocks
from .curve_core import Curve, EnergyParams, Interval, derivative
from .energies import tp_energy_local


@dataclass(frozen=True)
class SeminormSpec:
    """Parameters of [f]_{W^{s,p}(domain)}; ``domain=None`` is the whole circle."""

    s: float
    p: float
    domain: Interval | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.s < 1.0):
            raise ValueError("s must lie in (0, 1)")
        if not (self.p > 1.0):
            raise ValueError("p must exceed 1")

    @classmethod
    def critical(cls, q: float, domain: Interval | None = None) -> "SeminormSpec":
        """The scale-invariant pairing W^{1/q, q}."""
        return cls(1.0 / q, q, domain)

    @classmethod
    def for_energy(cls, params: EnergyParams, domain: Interval | None = None) -> "SeminormSpec":
        """W^{(p-q-1)/q, q}, the space of gamma' matched to TP^{p,q}."""
        return cls((params.p - params.q - 1.0) / params.q, params.q, domain)


def _as_columns(f) -> np.ndarray:
    arr = np.asarray(f, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def double_sum(values: np.ndarray, coords: np.ndarray, weights: np.ndarray, s: float, p: float,
               period: float | None = None) -> float:
    """sum_{i != j} w_i w_j |f_i - f_j|^p / dist_ij^{1+sp}.

    ``period`` switches the distance to the wrapped one on R/(period Z).
    """
    vals = _as_columns(values)
    m = vals.shape[0]
    expo = 1.0 + s * p

    def block(a, b):
        diff = vals[a:b, None, :] - vals[None, :, :]
        num = np.sqrt(np.sum(diff * diff, axis=2)) ** p
        dist = np.abs(coords[a:b, None] - coords[None, :])
        if period is not None:
            dist = np.minimum(dist % period, period - dist % period)
        rows = np.arange(a, b)
        offdiag = rows[:, None] != np.arange(m)[None, :]
        out = np.zeros_like(num)
        out[offdiag] = num[offdiag] / dist[offdiag] ** expo
        return (out * weights[None, :]).sum(axis=1) * weights[a:b]

    parts = map_blocks(block, row_blocks(m, block_size(m)))
    return float(np.sum(np.concatenate(parts)))


def _domain_samples(n: int, domain: Interval | None) -> tuple[np.ndarray, np.ndarray]:
    """Indices and unwrapped parameters of the grid samples in the domain."""
    if domain is None:
        idx = np.arange(n)
        return idx, idx / n
    idx = domain.indices(n)
    return idx, domain.center + domain.local_coordinates(n)


def seminorm_power(f, spec: SeminormSpec, x: np.ndarray | None = None) -> float:
    """[f]^p without the final root; see gagliardo_seminorm."""
    vals = _as_columns(f)
    if x is not None:
        x = np.asarray(x, dtype=float)
        if x.size != vals.shape[0] or x.size < 2:
            raise ValueError("need one coordinate per sample and at least two samples")
        w = np.empty_like(x)
        w[1:-1] = 0.5 * (x[2:] - x[:-2])
        w[0] = 0.5 * (x[1] - x[0])
        w[-1] = 0.5 * (x[-1] - x[-2])
        return double_sum(vals, x, w, spec.s, spec.p)
    n = vals.shape[0]
    idx, coords = _domain_samples(n, spec.domain)
    if idx.size < 2:
        raise ValueError("domain contains fewer than two samples")
    w = np.full(idx.size, 1.0 / n)
    period = 1.0 if spec.domain is None else None
    return double_sum(vals[idx], coords, w, spec.s, spec.p, period=period)


def gagliardo_seminorm(f, spec: SeminormSpec, x: np.ndarray | None = None) -> float:
    """[f]_{W^{s,p}} by the trapezoid double sum with the diagonal removed.

    Without ``x`` the samples live on the uniform grid of R/Z and distances are
    geodesic (on a sub-interval of diameter < 1/2 they are plain differences).
    With ``x`` the samples sit at the given points of the line, weighted by the
    trapezoid rule.
    """
    return seminorm_power(f, spec, x) ** (1.0 / spec.p)


def identification_taylor(c: Curve, spec: SeminormSpec, B: Interval | None = None) -> float:
    """Double integral over B x B of |gamma(y) - gamma(x) - gamma'(x)(y - x)|^q / |x - y|^{q + 1 + sq}."""
    B = B if B is not None else spec.domain
    if B is None or B.diameter >= 0.5:
        raise ValueError("need an interval of diameter < 1/2")
    n = c.n
    idx = B.indices(n)
    if idx.size < 2:
        raise ValueError("interval contains fewer than two samples")
    x = B.local_coordinates(n)
    pts = c.points[idx]
    tan = derivative(c)[idx]
    q, s = spec.p, spec.s
    expo = q + 1.0 + s * q
    m = idx.size

    def block(a, b):
        dx = x[None, :] - x[a:b, None]
        rem = pts[None, :, :] - pts[a:b, None, :] - tan[a:b, None, :] * dx[:, :, None]
        num = np.linalg.norm(rem, axis=2) ** q
        out = np.zeros_like(num)
        mask = np.arange(a, b)[:, None] != np.arange(m)[None, :]
        out[mask] = num[mask] / np.abs(dx[mask]) ** expo
        return out.sum(axis=1)

    parts = map_blocks(block, row_blocks(m, block_size(m)))
    return float(np.sum(np.concatenate(parts))) / (n * n)


def identification_averaged(g, spec: SeminormSpec, B: Interval | None = None) -> float:
    """Double integral over B x B of (average over z in [x, y] of |g(x) - g(z)|^p) / |x - y|^{1 + sp}.

    The inner average is the trapezoid rule over the samples between x and y.
    """
    B = B if B is not None else spec.domain
    if B is None or B.diameter >= 0.5:
        raise ValueError("need an interval of diameter < 1/2")
    vals = _as_columns(g)
    n = vals.shape[0]
    idx = B.indices(n)
    m = idx.size
    if m < 2:
        raise ValueError("interval contains fewer than two samples")
    local = vals[idx]
    x = B.local_coordinates(n)
    p, s = spec.p, spec.s
    expo = 1.0 + s * p
    total = np.zeros(m)
    for i in range(m):
        d = np.linalg.norm(local - local[i], axis=1) ** p
        # trapezoid averages of d over [i, j] for every j, via prefix sums
        csum = np.concatenate([[0.0], np.cumsum(d)])
        j = np.arange(m)
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        steps = hi - lo
        interior = csum[hi + 1] - csum[lo] - 0.5 * (d[lo] + d[hi])
        mask = steps > 0
        avg = np.zeros(m)
        avg[mask] = interior[mask] / steps[mask]
        row = np.zeros(m)
        row[mask] = avg[mask] / np.abs(x[j[mask]] - x[i]) ** expo
        total[i] = row.sum()
    return float(np.sum(total)) / (n * n)


def embedding_check(g, B: Interval, s: float, t: float, p: float, q_exp: float):
    """([g]_{W^{t,q}(B)}, diam(B)^{s-t-1/p+1/q} [g]_{W^{s,p}(B)}, ratio)."""
    if not t < s:
        raise ValueError("need t < s")
    if s - 1.0 / p < t - 1.0 / q_exp - 1e-12:
        raise ValueError("need s - 1/p >= t - 1/q")
    lhs = gagliardo_seminorm(g, SeminormSpec(t, q_exp, B))
    rhs = B.diameter ** (s - t - 1.0 / p + 1.0 / q_exp) * gagliardo_seminorm(g, SeminormSpec(s, p, B))
    if rhs == 0.0:
        return lhs, rhs, 0.0 if lhs == 0.0 else np.inf
    return lhs, rhs, lhs / rhs


@dataclass(frozen=True)
class GapReport:
    lhs: float
    tp_local: float
    seminorm_2q_term: float
    empirical_C: float


def gap_estimate_report(c: Curve, B: Interval, params: EnergyParams) -> GapReport:
    """Smallest C with [gamma']^q <= C (TP(gamma, B) + [gamma']^{2q}) on the ball B."""
    if B.diameter >= 0.5:
        raise ValueError("need an interval of diameter < 1/2")
    spec = SeminormSpec.for_energy(params, B)
    lhs = seminorm_power(derivative(c), spec)
    tp_local = tp_energy_local(c, B, params, "aa").value
    term = lhs * lhs
    if lhs == 0.0:
        return GapReport(0.0, tp_local, term, 0.0)
    return GapReport(lhs, tp_local, term, lhs / (tp_local + term))
