"""Gluing two sampled fields across a thin band, and the comparison curve built from it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .curve_core import Curve, CurveError, Interval, smooth_step
from .sobolev import SeminormSpec, double_sum, seminorm_power

Field = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]

MIN_BAND_SAMPLES = 8


def outer_grid(spacing: float) -> np.ndarray:
    """Nodes -2 + k h strictly inside (-2, 2); 1/h must be an integer so that +-1 are nodes."""
    steps = int(round(1.0 / spacing))
    if steps < 1 or abs(steps * spacing - 1.0) > 1e-12:
        raise ValueError("grid spacing must be 1/m for an integer m")
    return np.arange(-2 * steps + 1, 2 * steps) / steps


def inner_grid(spacing: float) -> np.ndarray:
    """Nodes of [-1, 1] with the given spacing, endpoints included."""
    steps = int(round(1.0 / spacing))
    if steps < 1 or abs(steps * spacing - 1.0) > 1e-12:
        raise ValueError("grid spacing must be 1/m for an integer m")
    return np.arange(-steps, steps + 1) / steps


def _columns(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


def _sample(f: Field, x: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Values of a field at x: call it, or interpolate linearly from its grid samples."""
    if callable(f):
        return _columns(f(x))
    vals = _columns(f)
    if vals.shape[0] != grid.size:
        raise ValueError(f"expected {grid.size} samples, got {vals.shape[0]}")
    return np.column_stack([np.interp(x, grid, vals[:, k]) for k in range(vals.shape[1])])


def band_cutoff(x: np.ndarray, delta: float) -> np.ndarray:
    """eta_delta: 0 for |x| > 1 - delta/4, 1 for |x| <= 1 - delta/2, |eta'| <= C/delta between."""
    s = (1.0 - 0.25 * delta - np.abs(np.asarray(x, dtype=float))) / (0.25 * delta)
    return smooth_step(2.0 * s - 1.0)


@dataclass(frozen=True)
class GluedField:
    x: np.ndarray
    values: np.ndarray
    delta: float
    u_trace: tuple[np.ndarray, np.ndarray]
    v_trace: tuple[np.ndarray, np.ndarray]
    u_values: np.ndarray
    v_inner: Callable[[np.ndarray], np.ndarray]

    def region(self) -> dict[str, np.ndarray]:
        """Boolean masks of the four pieces of the construction."""
        ax = np.abs(self.x)
        return {
            "outer": ax > 1.0,
            "inner": ax < 1.0 - self.delta,
            "left_band": (self.x >= -1.0) & (self.x <= -1.0 + self.delta),
            "right_band": (self.x >= 1.0 - self.delta) & (self.x <= 1.0),
        }


def luckhaus_glue(u: Field, v: Field, delta: float, spacing: float = 1.0 / 512) -> GluedField:
    """w = u off [-1, 1], v(x / (1 - delta)) on |x| < 1 - delta, and in the two bands
    of width delta the blend (1 - eta) u(+-1) + eta v(+-1).

    Fields are callables or samples on ``outer_grid(spacing)`` (u) and
    ``inner_grid(spacing)`` (v); sampled v is interpolated linearly. The traces at
    +-1 are the nearest samples, which for these grids are the samples at +-1.
    """
    if not (0.0 < delta <= 0.5):
        raise ValueError("delta must lie in (0, 1/2]")
    x = outer_grid(spacing)
    if int(np.sum((x >= 1.0 - delta) & (x <= 1.0))) < MIN_BAND_SAMPLES:
        raise ValueError(f"fewer than {MIN_BAND_SAMPLES} samples in a band; refine the grid")
    xv = inner_grid(spacing)
    u_vals = _sample(u, x, x)

    def v_at(points):
        return _sample(v, np.asarray(points, dtype=float), xv)

    left, right = int(np.argmin(np.abs(x + 1.0))), int(np.argmin(np.abs(x - 1.0)))
    u_trace = (u_vals[left].copy(), u_vals[right].copy())
    v_ends = v_at(np.array([xv[0], xv[-1]]))
    v_trace = (v_ends[0], v_ends[1])

    w = np.empty_like(u_vals)
    ax = np.abs(x)
    outer = ax > 1.0
    inner = ax < 1.0 - delta
    w[outer] = u_vals[outer]
    w[inner] = v_at(x[inner] / (1.0 - delta))
    eta = band_cutoff(x, delta)[:, None]
    for side, trace_u, trace_v in ((x < 0.0, u_trace[0], v_trace[0]), (x > 0.0, u_trace[1], v_trace[1])):
        band = side & ~outer & ~inner
        w[band] = (1.0 - eta[band]) * trace_u + eta[band] * trace_v
    return GluedField(x, w, delta, u_trace, v_trace, u_vals, v_at)


def distance_to_images(glued: GluedField) -> np.ndarray:
    """Per-sample distance from w to the sampled images of u and of v."""
    v_samples = glued.v_inner(inner_grid(glued.x[1] - glued.x[0]))
    image = np.vstack([glued.u_values, v_samples])
    d = np.linalg.norm(glued.values[:, None, :] - image[None, :, :], axis=2)
    return d.min(axis=1)


def trace_mismatch(glued: GluedField) -> float:
    """|u(-1) - v(-1)| + |u(1) - v(1)|."""
    return float(sum(np.linalg.norm(a - b) for a, b in zip(glued.u_trace, glued.v_trace)))


@dataclass(frozen=True)
class LuckhausReport:
    lhs: float
    terms: dict[str, float]
    empirical_C: float


def _kernel_sum(fx, x, wx, fy, y, wy, s, p, shift=None) -> float:
    """sum_ij wx_i wy_j |f(x_i) - f(y_j)|^p / |x_i - shift(y_j)|^{1 + sp}, skipping x_i = shift(y_j)."""
    ys = y if shift is None else shift(y)
    diff = fx[:, None, :] - fy[None, :, :]
    num = np.sqrt(np.sum(diff * diff, axis=2)) ** p
    dist = np.abs(x[:, None] - ys[None, :])
    out = np.zeros_like(num)
    ok = dist > 0.0
    out[ok] = num[ok] / dist[ok] ** (1.0 + s * p)
    return float(np.sum(out * wx[:, None] * wy[None, :]))


def _point_sum(value, f, y, w, at, s, p) -> float:
    """sum_j w_j |value - f(y_j)|^p / |at - y_j|^{1 + sp}, skipping y_j = at."""
    num = np.linalg.norm(f - value[None, :], axis=1) ** p
    dist = np.abs(at - y)
    ok = dist > 0.0
    return float(np.sum(w[ok] * num[ok] / dist[ok] ** (1.0 + s * p)))


def luckhaus_estimate_report(u: Field, v: Field, delta: float, s: float, p: float, r: float = 1.5,
                             spacing: float = 1.0 / 512) -> LuckhausReport:
    """[w]^p on (-r, r) next to each right-hand-side term of the gluing estimate (constants set to 1).

    Terms: ``uu`` (u against u off [-1, 1]), ``vv`` ((1 - delta)^{1 - sp} [v]^p on (-1, 1)),
    ``uv`` (twice the compressed cross term), ``u_tail`` and ``v_tail`` (delta-weighted
    one-point integrals at +-1) and ``mismatch`` (delta^{1 - sp} times the trace jumps).
    """
    if not (1.0 < r <= 2.0):
        raise ValueError("r must lie in (1, 2]")
    glued = luckhaus_glue(u, v, delta, spacing)
    x = glued.x
    h = x[1] - x[0]
    spec = SeminormSpec(s, p)
    window = np.abs(x) < r
    lhs = seminorm_power(glued.values[window], spec, x=x[window])

    ring = (np.abs(x) > 1.0) & window
    xr, ur = x[ring], glued.u_values[ring]
    wr = np.full(xr.size, h)
    uu = double_sum(ur, xr, wr, s, p)

    xv = inner_grid(h)
    vv_vals = glued.v_inner(xv)
    wv = np.full(xv.size, h)
    wv[[0, -1]] = 0.5 * h
    vv = (1.0 - delta) ** (1.0 - s * p) * double_sum(vv_vals, xv, wv, s, p)
    uv = 2.0 * (1.0 - delta) * _kernel_sum(ur, xr, wr, vv_vals, xv, wv, s, p,
                                           shift=lambda y: (1.0 - delta) * y)

    outside = np.abs(x) > 1.0
    xo, uo = x[outside], glued.u_values[outside]
    wo = np.full(xo.size, h)
    u_tail = delta * (_point_sum(glued.u_trace[1], ur, xr, wr, 1.0, s, p)
                      + _point_sum(glued.u_trace[0], uo, xo, wo, -1.0, s, p))
    v_tail = delta * (1.0 - delta) ** (-s * p) * (
        _point_sum(glued.v_trace[1], vv_vals, xv, wv, 1.0, s, p)
        + _point_sum(glued.v_trace[0], vv_vals, xv, wv, -1.0, s, p))
    mismatch = delta ** (1.0 - s * p) * sum(
        float(np.linalg.norm(a - b)) ** p for a, b in zip(glued.u_trace, glued.v_trace))
    terms = {"uu": uu, "vv": vv, "uv": uv, "u_tail": u_tail, "v_tail": v_tail, "mismatch": mismatch}
    total = sum(terms.values())
    if total == 0.0:
        empirical = 0.0 if lhs == 0.0 else np.inf
    else:
        empirical = lhs / total
    return LuckhausReport(lhs, terms, empirical)


def comparison_map(c_target: Curve, c_base: Curve, B: Interval, delta: float,
                   corrector_radius: float = 0.5) -> Curve:
    """Curve equal to c_base off B whose derivative inside B is the glued field.

    In the local coordinate x = (t - centre) / radius of B, the edge vectors
    (scaled by n) of c_base play the outer field and those of c_target the inner
    one. The glued edges are summed from the sample where B starts; the mismatch
    D = sum over B of (base edge - glued edge) is added back with the weight
    theta(x), a smooth step from 0 at x = -corrector_radius to 1 at x = corrector_radius,
    so the last sample of B lands on c_base again. Samples off B are copied from c_base.
    """
    n = c_base.n
    if c_target.n != n:
        raise ValueError("curves must share the grid")
    if not (0.0 < delta <= 0.5):
        raise ValueError("delta must lie in (0, 1/2]")
    idx = B.indices(n)
    x = B.local_coordinates(n) / B.radius
    if np.sum(x >= 1.0 - delta) < MIN_BAND_SAMPLES:
        raise ValueError(f"fewer than {MIN_BAND_SAMPLES} samples in a band; refine the grid")
    base_edges = c_base.edges() * n
    target_edges = c_target.edges() * n
    # edge k joins samples k and k+1 and sits at the midpoint in local coordinates
    mid = x[:-1] + 0.5 * (x[1] - x[0])
    edge_idx = idx[:-1]
    u_vals = base_edges[edge_idx]
    left_out = (idx[0] - 1) % n
    right_out = idx[-1] % n
    u_trace = (base_edges[left_out], base_edges[right_out])

    def target_at(xs):
        pos = (B.center + xs * B.radius) * n - 0.5
        lo = np.floor(pos).astype(int)
        frac = (pos - lo)[:, None]
        return (1.0 - frac) * target_edges[lo % n] + frac * target_edges[(lo + 1) % n]

    v_trace = (target_at(np.array([-1.0]))[0], target_at(np.array([1.0]))[0])
    glued = np.empty_like(u_vals)
    inner = np.abs(mid) < 1.0 - delta
    glued[inner] = target_at(mid[inner] / (1.0 - delta))
    eta = band_cutoff(mid, delta)[:, None]
    for side, tu, tv in ((mid < 0.0, u_trace[0], v_trace[0]), (mid > 0.0, u_trace[1], v_trace[1])):
        band = side & ~inner
        glued[band] = (1.0 - eta[band]) * tu + eta[band] * tv
    defect = np.sum(u_vals - glued, axis=0) / n
    # band width measured along c_base, so the test is independent of the parametrization speed
    band_width = np.sum(np.linalg.norm(u_vals[~inner], axis=1)) / (2.0 * n)
    if np.linalg.norm(defect) > band_width:
        raise CurveError("corrector exceeds the band width; the inputs are incompatible")
    theta = smooth_step(x / corrector_radius)[:, None]
    partial = np.vstack([np.zeros(3), np.cumsum(glued, axis=0) / n])
    out = c_base.points.copy()
    out[idx] = c_base.points[idx[0]] + partial + theta * defect
    return Curve(out)
