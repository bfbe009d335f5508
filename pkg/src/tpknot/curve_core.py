"""Sampled closed curves on R/Z and the geometric primitives built on them.

A curve is stored as n points at the uniform parameters t_i = i/n; indexing
is cyclic and the closing point is never stored twice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.interpolate import CubicSpline

from ._parallel import block_size, map_blocks, row_blocks

MIN_SAMPLES = 8


class CurveError(ValueError):
    """Raised when sampled data violates a curve invariant."""


@dataclass(frozen=True, eq=False)
class Curve:
    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise CurveError(f"expected an (n, 3) array of points, got shape {pts.shape}")
        if pts.shape[0] < MIN_SAMPLES:
            raise CurveError(f"need at least {MIN_SAMPLES} samples, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise CurveError("points must be finite")
        edges = np.roll(pts, -1, axis=0) - pts
        if np.min(np.linalg.norm(edges, axis=1)) <= 0.0:
            raise CurveError("consecutive points coincide")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def grid(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    def edges(self) -> np.ndarray:
        """Forward differences gamma_{i+1} - gamma_i."""
        return np.roll(self.points, -1, axis=0) - self.points

    def length(self) -> float:
        return float(np.sum(np.linalg.norm(self.edges(), axis=1)))

    def transformed(self, rotation: np.ndarray | None = None, shift: Iterable[float] | None = None,
                    scale: float = 1.0) -> "Curve":
        pts = scale * self.points
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=float).T
        if shift is not None:
            pts = pts + np.asarray(shift, dtype=float)
        return Curve(pts)

    def reversed(self) -> "Curve":
        """The curve traversed as t -> -t (sample 0 stays in place)."""
        return Curve(np.roll(self.points[::-1], 1, axis=0))

    def to_dict(self) -> dict:
        return {"n": self.n, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Curve":
        try:
            n = int(data["n"])
            pts = np.asarray(data["points"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise CurveError(f"malformed curve record: {exc}") from exc
        if pts.shape[0] != n:
            raise CurveError(f"n = {n} but {pts.shape[0]} points given")
        return cls(pts)


@dataclass(frozen=True, eq=False)
class TangentField:
    vectors: np.ndarray

    def __post_init__(self) -> None:
        vec = np.array(self.vectors, dtype=np.float64)
        if vec.ndim != 2 or vec.shape[1] != 3:
            raise CurveError(f"expected an (n, 3) array of vectors, got shape {vec.shape}")
        norms = np.linalg.norm(vec, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise CurveError("tangent vectors must have unit length")
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def mean(self) -> np.ndarray:
        return self.vectors.mean(axis=0)


def tangent_field(c: Curve, kind: str = "central") -> TangentField:
    """Unit tangents of a curve.

    ``central`` normalizes the central-difference derivative at the samples.
    ``edge`` normalizes the forward edges; for a polygon with equal chords these
    vectors sum to zero exactly, which the Euler-Lagrange checks rely on.
    """
    if kind == "central":
        vec = derivative(c)
    elif kind == "edge":
        vec = c.edges()
    else:
        raise ValueError(f"unknown tangent kind {kind!r}")
    norms = np.linalg.norm(vec, axis=1)
    if np.min(norms) == 0.0:
        raise CurveError("derivative vanishes; no unit tangent")
    return TangentField(vec / norms[:, None])


@dataclass(frozen=True)
class EnergyParams:
    p: float
    q: float

    def __post_init__(self) -> None:
        p, q = float(self.p), float(self.q)
        if not (q > 1.0 and q + 2.0 <= p + 1e-12 and p < 2.0 * q + 1.0):
            raise ValueError(f"(p, q) = ({p}, {q}) violates q > 1 and q + 2 <= p < 2q + 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def scale_invariant(cls, q: float) -> "EnergyParams":
        return cls(q + 2.0, q)

    @property
    def is_scale_invariant(self) -> bool:
        return abs(self.p - self.q - 2.0) < 1e-12


@dataclass(frozen=True)
class Interval:
    """Geodesic ball B(center, radius) in R/Z, sampled half-open as [c - r, c + r)."""

    center: float
    radius: float

    def __post_init__(self) -> None:
        if not (0.0 < self.radius < 0.5):
            raise ValueError("interval radius must lie in (0, 1/2)")
        object.__setattr__(self, "center", float(self.center) % 1.0)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def indices(self, n: int) -> np.ndarray:
        """Grid indices inside the interval, in order along the interval."""
        start = self.center - self.radius
        offsets = (np.arange(n) / n - start) % 1.0
        offsets[offsets > 1.0 - 1e-12] = 0.0
        inside = np.nonzero(offsets < self.diameter - 1e-12)[0]
        return inside[np.argsort(offsets[inside], kind="stable")]

    def local_coordinates(self, n: int) -> np.ndarray:
        """Signed parameter offsets from the center for the samples in ``indices``."""
        idx = self.indices(n)
        off = (idx / n - self.center + 0.5) % 1.0 - 0.5
        return off


def geodesic_distance(x, y):
    """rho(x, y) = min(|x - y|, 1 - |x - y|) on R/Z; works elementwise on arrays."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % 1.0
    out = np.minimum(d, 1.0 - d)
    return float(out) if np.ndim(out) == 0 else out


def param_index(x: float, n: int) -> int:
    """Nearest grid index to the parameter x."""
    return int(np.rint((float(x) % 1.0) * n)) % n


def derivative(c: Curve, order: int = 2) -> np.ndarray:
    """Periodic central-difference derivative gamma'(t_i), of order 2 or 4."""
    pts = c.points
    n = c.n
    if order == 2:
        return (np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)) * (n / 2.0)
    if order == 4:
        return (8.0 * (np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0))
                - (np.roll(pts, -2, axis=0) - np.roll(pts, 2, axis=0))) * (n / 12.0)
    raise ValueError("derivative order must be 2 or 4")


def shortest_arc(i, j, n: int):
    """Start index and number of grid steps of the shortest arc from t_i to t_j.

    Antipodal pairs take the arc running forward from t_i.
    """
    i = np.asarray(i)
    j = np.asarray(j)
    fwd = (j - i) % n
    forward = 2 * fwd <= n
    start = np.where(forward, i, j)
    steps = np.where(forward, fwd, n - fwd)
    return start, steps


class ArcSums:
    """Trapezoid arc averages of a sampled periodic field in O(1) per query.

    The average over the arc starting at index a with m >= 1 steps is
    (f_a/2 + f_{a+1} + ... + f_{a+m-1} + f_{a+m}/2) / m.
    """

    def __init__(self, values: np.ndarray):
        vals = np.asarray(values, dtype=float)
        self.values = vals
        n = vals.shape[0]
        tiled = np.concatenate([vals, vals], axis=0)
        self._prefix = np.concatenate([np.zeros((1,) + vals.shape[1:]), np.cumsum(tiled, axis=0)], axis=0)
        self.n = n

    def mean(self, start: np.ndarray, steps: np.ndarray) -> np.ndarray:
        start = np.asarray(start)
        steps = np.asarray(steps)
        end = start + steps
        total = self._prefix[end + 1] - self._prefix[start]
        total = total - 0.5 * (self.values[start % self.n] + self.values[end % self.n])
        m = np.maximum(steps, 1)
        if total.ndim > steps.ndim:
            m = m[..., None]
        return total / m


def reparametrize_constant_speed(c: Curve, tol: float = 1e-14, max_iter: int = 60) -> Curve:
    """Resample so that all consecutive chords have equal length.

    The image is the periodic cubic spline through the samples in chord-length
    parametrization; new samples are placed on it by fixed-point iteration on
    cumulative chord length, keeping sample 0 fixed.
    """
    pts = c.points
    n = c.n
    chords = np.linalg.norm(c.edges(), axis=1)
    total = float(np.sum(chords))
    if total == 0.0:
        raise CurveError("curve has zero length")
    knots = np.concatenate([[0.0], np.cumsum(chords)])
    spline = CubicSpline(knots, np.vstack([pts, pts[:1]]), bc_type="periodic")
    period = knots[-1]

    tau = knots[:-1].copy()
    for _ in range(max_iter):
        new = spline(tau)
        lengths = np.linalg.norm(np.roll(new, -1, axis=0) - new, axis=1)
        mean = lengths.mean()
        if np.max(np.abs(lengths - mean)) <= tol * mean:
            break
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        targets = np.arange(n) * (cum[-1] / n)
        tau = np.interp(targets, cum, np.concatenate([tau, [tau[0] + period]]))
    new = spline(tau)
    new[0] = pts[0]
    return Curve(new)


def mollifier_weights(delta: float, n: int) -> np.ndarray:
    """Discrete weights of eta_delta with eta(t) = C (1 - t^2)^3 on (-1, 1), summing to one."""
    if not (0.0 < delta < 0.25):
        raise ValueError("mollifier width must lie in (0, 1/4)")
    if delta * n < 2.0:
        raise ValueError(f"delta * n = {delta * n:.3g} < 2: grid too coarse for this mollifier width")
    half = int(np.ceil(delta * n))
    k = np.arange(-half, half + 1)
    t = k / (n * delta)
    w = np.where(np.abs(t) < 1.0, (1.0 - t * t) ** 3, 0.0)
    return w / w.sum()


def mollify(c: Curve, delta: float) -> Curve:
    """Periodic convolution with the polynomial bump of width delta."""
    w = mollifier_weights(delta, c.n)
    half = (w.size - 1) // 2
    out = np.zeros_like(c.points)
    for k, wk in zip(range(-half, half + 1), w):
        if wk != 0.0:
            out += wk * np.roll(c.points, -k, axis=0)
    return Curve(out)


def _pair_reduce(n: int, rows: np.ndarray, cols: np.ndarray, func, init: float, combine):
    """Reduce func(row_block, cols) over row blocks with a fixed block layout."""
    blocks = row_blocks(rows.size, block_size(max(cols.size, 1)))
    parts = map_blocks(lambda a, b: func(rows[a:b], cols), blocks)
    out = init
    for part in parts:
        out = combine(out, part)
    return out


def bilipschitz_constant(c: Curve, window: Interval | None = None, floor: float = 2.0):
    """(lower, upper) bounds of |gamma(x) - gamma(y)| / rho(x, y) over sample pairs.

    Pairs closer than ``floor`` grid steps are skipped: at that range the ratio
    only measures the discretization.
    """
    n = c.n
    idx = np.arange(n) if window is None else window.indices(n)
    if idx.size < 4:
        raise ValueError("window must contain at least 4 samples")
    pts = c.points
    min_rho = floor / n - 1e-12

    def block(rows, cols):
        rho = geodesic_distance(rows[:, None] / n, cols[None, :] / n)
        chord = np.linalg.norm(pts[rows][:, None, :] - pts[cols][None, :, :], axis=2)
        mask = rho >= min_rho
        if not np.any(mask):
            return (np.inf, -np.inf)
        ratio = chord[mask] / rho[mask]
        return (float(ratio.min()), float(ratio.max()))

    lo, hi = _pair_reduce(n, idx, idx, block, (np.inf, -np.inf),
                          lambda a, b: (min(a[0], b[0]), max(a[1], b[1])))
    if not np.isfinite(lo):
        raise ValueError("no sample pairs above the resolution floor")
    return lo, hi


def arc_quadrature(start: int, steps: int, n: int, order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Indices and weights integrating a sampled periodic function over an arc.

    Order 2 is the composite trapezoid rule. Order 4 adds the Euler-Maclaurin
    endpoint correction -h^2/12 (f'(b) - f'(a)) with central-difference slopes,
    which reaches one sample outside each end of the arc. Weights always sum to
    steps / n.
    """
    h = 1.0 / n
    idx = np.arange(start, start + steps + 1)
    w = np.full(idx.size, h)
    w[0] = w[-1] = 0.5 * h
    if order == 2:
        return idx % n, w
    if order != 4:
        raise ValueError("quadrature order must be 2 or 4")
    corr_idx = np.array([start - 1, start + 1, start + steps - 1, start + steps + 1])
    corr_w = np.array([-1.0, 1.0, 1.0, -1.0]) * (h / 24.0)
    all_idx = np.concatenate([idx, corr_idx]) % n
    all_w = np.concatenate([w, corr_w])
    uniq, inv = np.unique(all_idx, return_inverse=True)
    merged = np.zeros(uniq.size)
    np.add.at(merged, inv, all_w)
    return uniq, merged


def ftc_identity_check(c: Curve, x: float, y: float, order: int = 4) -> float:
    """Residual of |gamma(y) - gamma(x)|^2 = rho * int |gamma'|^2 - 1/2 int int |gamma'(s) - gamma'(t)|^2.

    Both integrals run over the shortest arc between x and y with the same
    quadrature rule; the double integral is evaluated as an explicit double sum.
    ``order`` selects the derivative stencil and arc rule (2 or 4).
    """
    n = c.n
    i, j = param_index(x, n), param_index(y, n)
    if i == j:
        raise ValueError("x and y fall on the same sample")
    start, steps = shortest_arc(i, j, n)
    start, steps = int(start), int(steps)
    idx, w = arc_quadrature(start, steps, n, order)
    g = derivative(c, order)[idx]
    rho = steps / n
    single = float(np.sum(w * np.sum(g * g, axis=1)))
    diff = g[:, None, :] - g[None, :, :]
    double = 0.5 * float(np.sum(w[:, None] * w[None, :] * np.sum(diff * diff, axis=2)))
    chord = c.points[(start + steps) % n] - c.points[start]
    return abs(float(chord @ chord) - (rho * single - double))


def min_self_distance_guard(c: Curve, exclusion: float) -> float:
    """Minimum distance between samples whose parameter distance is at least ``exclusion``."""
    if not (0.0 < exclusion < 0.25):
        raise ValueError("exclusion must lie in (0, 1/4)")
    n = c.n
    pts = c.points
    idx = np.arange(n)

    def block(rows, cols):
        rho = geodesic_distance(rows[:, None] / n, cols[None, :] / n)
        mask = rho >= exclusion - 1e-12
        if not np.any(mask):
            return np.inf
        d = np.linalg.norm(pts[rows][:, None, :] - pts[cols][None, :, :], axis=2)
        return float(d[mask].min())

    return _pair_reduce(n, idx, idx, block, np.inf, min)


def resample(c: Curve, n: int) -> Curve:
    """Evaluate the periodic cubic spline through the samples (in t) at n uniform parameters."""
    t = np.arange(c.n + 1) / c.n
    spline = CubicSpline(t, np.vstack([c.points, c.points[:1]]), bc_type="periodic")
    return Curve(spline(np.arange(n) / n))


BUMP_MASS = 35.0 / 32.0


def bump(t):
    """Unit-mass polynomial bump (35/32)(1 - t^2)^3 on (-1, 1), zero outside."""
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) < 1.0, BUMP_MASS * (1.0 - t * t) ** 3, 0.0)


def smooth_step(t):
    """Integral of ``bump`` from -1 to t: 0 for t <= -1, 1 for t >= 1, C^3 in between."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    return 0.5 + BUMP_MASS * (t - t ** 3 + 0.6 * t ** 5 - t ** 7 / 7.0)


def interval_bump(n: int, B: Interval) -> np.ndarray:
    """Samples of the bump rescaled to B with unit integral over R/Z."""
    off = (np.arange(n) / n - B.center + 0.5) % 1.0 - 0.5
    return bump(off / B.radius) / B.radius
