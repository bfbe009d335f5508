"""Curve fixtures with known properties, each paired with the facts the test suite re-checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .curve_core import Curve, CurveError, Interval, reparametrize_constant_speed

TAU = 2.0 * np.pi


@dataclass(frozen=True)
class OracleFact:
    quantity: str
    value: object
    provenance: str


@dataclass(frozen=True)
class ZooEntry:
    name: str
    generator: Callable[..., Curve]
    default_n: int
    facts: tuple[OracleFact, ...] = field(default_factory=tuple)

    def make(self, n: int | None = None, **kwargs) -> Curve:
        return self.generator(self.default_n if n is None else n, **kwargs)


def _check_n(n: int, minimum: int = 8) -> None:
    if n < minimum:
        raise ValueError(f"need at least {minimum} samples, got {n}")


def _angles(n: int) -> np.ndarray:
    return TAU * np.arange(n) / n


def make_circle(n: int, radius: float = 1.0) -> Curve:
    """Planar circle of the given radius sampled at uniform angles (constant speed)."""
    _check_n(n)
    t = _angles(n)
    return Curve(radius * np.column_stack([np.cos(t), np.sin(t), np.zeros(n)]))


def make_perturbed_circle(n: int, amplitude: float = 0.1, modes=(2, 3), seed: int = 0) -> Curve:
    """Unit circle with a smooth radial perturbation and a small out-of-plane wobble."""
    _check_n(n)
    rng = np.random.default_rng(seed)
    t = _angles(n)
    radial = np.zeros(n)
    for m in modes:
        radial += np.cos(m * t + rng.uniform(0.0, TAU))
    radial *= amplitude
    r = 1.0 + radial
    z = 0.5 * amplitude * np.sin(2 * t + rng.uniform(0.0, TAU))
    return Curve(np.column_stack([r * np.cos(t), r * np.sin(t), z]))


def make_ellipse(n: int, a: float = 2.0, b: float = 1.0) -> Curve:
    """Planar ellipse reparametrized to constant speed."""
    _check_n(n)
    t = _angles(n)
    raw = Curve(np.column_stack([a * np.cos(t), b * np.sin(t), np.zeros(n)]))
    return reparametrize_constant_speed(raw)


def make_double_segment(n: int) -> Curve:
    """The segment [0, 1/2] on the x-axis traversed forth and back (tent map); n must be even."""
    _check_n(n)
    if n % 2:
        raise ValueError("the fold needs an even sample count")
    t = np.arange(n) / n
    tent = np.where(t < 0.5, t, 1.0 - t)
    return Curve(np.column_stack([tent, np.zeros(n), np.zeros(n)]))


def _trefoil_points(t: np.ndarray) -> np.ndarray:
    return np.column_stack([np.sin(t) + 2.0 * np.sin(2.0 * t),
                            np.cos(t) - 2.0 * np.cos(2.0 * t),
                            -np.sin(3.0 * t)])


def make_trefoil(n: int, scale: float = 1.0) -> Curve:
    """Trefoil (sin t + 2 sin 2t, cos t - 2 cos 2t, -sin 3t), scaled, at constant speed."""
    _check_n(n)
    return reparametrize_constant_speed(Curve(scale * _trefoil_points(_angles(n))))


# ---------------------------------------------------------------- loglog curve

LOGLOG_DIRECTION = np.array([0.0, 1.0, 1.0]) / np.sqrt(2.0)


def _smooth_transition(t: np.ndarray) -> np.ndarray:
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1) built from exp(-1/t)."""
    t = np.clip(t, 0.0, 1.0)

    def psi(s):
        out = np.zeros_like(s)
        pos = s > 0.0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a, b = psi(t), psi(1.0 - t)
    return a / (a + b)


def loglog_cutoff(x: np.ndarray) -> np.ndarray:
    """Smooth cutoff: 1 on |x| <= 1/16, 0 on |x| >= 1/8."""
    return _smooth_transition((0.125 - np.abs(np.asarray(x, dtype=float))) / 0.0625)


def loglog_tangent(x: np.ndarray) -> np.ndarray:
    """Unit field (sin phi, cos phi, 1)/sqrt 2 with phi = cutoff(x) log log(1/|x|); phi = 0 at x = 0 is arbitrary."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    phase = np.zeros_like(x)
    inner = (ax > 0.0) & (ax < 0.125)
    phase[inner] = loglog_cutoff(x[inner]) * np.log(np.log(1.0 / ax[inner]))
    r = 1.0 / np.sqrt(2.0)
    return np.column_stack([r * np.sin(phase), r * np.cos(phase), np.full_like(x, r)])


def make_loglog_curve(n: int, bump: float = 0.3) -> Curve:
    """Closed curve whose tangent is discontinuous at parameter 0 while TP^{q+2,q} stays finite.

    On [-1/4, 1/4] the curve is the integral of ``loglog_tangent`` (Gauss-Legendre per
    grid cell), so it runs at unit speed there and sample 0 sits at the singular point.
    The remaining half closes up with a quintic Hermite arc (matching position,
    tangent and zero curvature at both ends, hence C^2) pushed sideways by a polynomial
    bump so that it clears the window.
    """
    _check_n(n, 1024)
    if n % 4:
        raise ValueError("sample count must be divisible by 4")
    half = n // 2
    knots = -0.25 + np.arange(half + 1) / n
    nodes, weights = np.polynomial.legendre.leggauss(8)
    lo, hi = knots[:-1], knots[1:]
    mid = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * nodes[None, :]
    vals = loglog_tangent(mid.ravel()).reshape(half, nodes.size, 3)
    steps = np.einsum("k,mkd->md", weights, vals) * (0.5 * (hi - lo))[:, None]
    window = np.vstack([np.zeros(3), np.cumsum(steps, axis=0)])
    end = window[-1]

    s = np.arange(1, half) / half
    # quintic Hermite basis with vanishing second derivatives at both ends
    h_start = 1.0 - 10.0 * s**3 + 15.0 * s**4 - 6.0 * s**5
    h_tan0 = s - 6.0 * s**3 + 8.0 * s**4 - 3.0 * s**5
    h_tan1 = -4.0 * s**3 + 7.0 * s**4 - 3.0 * s**5
    tangent = 0.5 * LOGLOG_DIRECTION  # unit speed in x over a parameter span of 1/2
    closure = h_start[:, None] * end + (h_tan0 + h_tan1)[:, None] * tangent
    closure += (bump * 64.0 * s**3 * (1.0 - s) ** 3)[:, None] * np.array([-1.0, 0.0, 0.0])
    pts = np.vstack([window, closure])
    return Curve(np.roll(pts, -(n // 4), axis=0))


LOGLOG_WINDOW = Interval(0.0, 0.25 - 1e-9)


# ------------------------------------------------------------ pull-tight family

PULLTIGHT_SCALE = 2.0
PULLTIGHT_TANGLE_RADIUS = 1.0


def _torus_trefoil(t: np.ndarray) -> np.ndarray:
    return np.column_stack([(2.0 + np.cos(3.0 * t)) * np.cos(2.0 * t),
                            (2.0 + np.cos(3.0 * t)) * np.sin(2.0 * t),
                            np.sin(3.0 * t)])


def _inverted_trefoil(t: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Image of the torus trefoil under inversion in the unit sphere about (3 + eps, 0, 0)."""
    centre = np.array([3.0 + eps, 0.0, 0.0])
    d = _torus_trefoil(t) - centre
    r2 = np.sum(d * d, axis=1)
    return d / r2[:, None], np.sqrt(r2)


def _pulltight_samples(n: int, k: int, fine: int = 1 << 18):
    if k < 0:
        raise ValueError("k must be nonnegative")
    eps = PULLTIGHT_SCALE * 2.0 ** (-k)
    t_fine = np.pi + TAU * np.arange(fine + 1) / fine
    pts_fine, _ = _inverted_trefoil(t_fine, eps)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts_fine, axis=0), axis=1))])
    t = np.interp(np.arange(n) / n * arc[-1], arc, t_fine)
    pts, dist = _inverted_trefoil(t, eps)
    return 2.0 * eps * pts, dist >= PULLTIGHT_TANGLE_RADIUS


def make_pulltight_family(n: int, k: int) -> Curve:
    """Trefoil tightened into a knotted arc of size ~2^{-k} on an otherwise round loop.

    The torus trefoil is inverted in a sphere centred at distance eps = 2^{1-k} from
    its outermost point: the nearby strand becomes a loop of diameter ~1/eps, the rest
    of the knot a tangle of size O(1). Scaling by 2 eps gives a loop of diameter about 2
    carrying a tangle of size O(eps) at parameter 0. TP^{q+2,q} is scale invariant, so
    the energy stays bounded as k grows while the tangle shrinks to a point.
    """
    _check_n(n)
    pts, tangle = _pulltight_samples(n, k)
    if np.count_nonzero(tangle) < 32:
        raise CurveError("splice resolved by fewer than 32 samples; increase n")
    return reparametrize_constant_speed(Curve(pts))


def pulltight_splice(n: int, k: int) -> Interval:
    """Parameter interval carrying the tangle of make_pulltight_family(n, k)."""
    _, tangle = _pulltight_samples(n, k)
    idx = np.flatnonzero(tangle)
    off = np.where(idx > n // 2, idx - n, idx)
    radius = float(max(-off.min(), off.max()) + 1) / n
    return Interval(0.0, radius)


# ------------------------------------------------------------------- registry

def _facts(*rows) -> tuple[OracleFact, ...]:
    return tuple(OracleFact(*row) for row in rows)


ZOO: dict[str, ZooEntry] = {
    "circle": ZooEntry("circle", make_circle, 256, _facts(
        ("tangent_point_radius", "identically equal to the radius", "closed form"),
        ("tp_energy(4,2)", float(np.pi**2), "closed form, integrand 1/4 per unit arclength squared"),
        ("k(d)", "(2 sin(d/2)/d)^2", "closed form"),
    )),
    "perturbed_circle": ZooEntry("perturbed_circle", make_perturbed_circle, 256, _facts(
        ("minimize(4,2)", "flows toward roundness", "expected unknot minimizer"),
    )),
    "ellipse": ZooEntry("ellipse", make_ellipse, 256, _facts(
        ("tp_equals_e", "discrepancy halves under refinement", "discrete Lagrange identity"),
    )),
    "double_segment": ZooEntry("double_segment", make_double_segment, 256, _facts(
        ("tp_energy", 0.0, "every chord is parallel to the tangent"),
        ("bilipschitz_lower", 0.0, "fold"),
    )),
    "trefoil": ZooEntry("trefoil", make_trefoil, 512, _facts(
        ("tp_energy(4,2)", "positive, refinement-stable within 2%", "refinement study"),
    )),
    "loglog": ZooEntry("loglog", make_loglog_curve, 2048, _facts(
        ("tp_energy(4,2)", "finite, refinement-stable within 5%", "refinement study"),
        ("bilipschitz_lower_on_window", 0.25, "third tangent component is 1/sqrt 2"),
        ("tangent", "discontinuous at parameter 0", "phase log log(1/|x|) is unbounded"),
    )),
    "pulltight": ZooEntry("pulltight", make_pulltight_family, 2048, _facts(
        ("tp_energy(4,2) over k", "bounded, within 25% across k = 2..6", "scale invariance"),
        ("local energy on splice", "k-independent positive floor", "concentration"),
    )),
}


def make(name: str, n: int | None = None, **kwargs) -> Curve:
    try:
        entry = ZOO[name]
    except KeyError:
        raise ValueError(f"unknown zoo curve {name!r}; choose from {sorted(ZOO)}") from None
    return entry.make(n, **kwargs)
