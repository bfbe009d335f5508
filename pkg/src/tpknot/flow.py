"""Energy descent with an embeddedness guard, concentration detection and lower-semicontinuity probes."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .curve_core import (
    Curve,
    CurveError,
    EnergyParams,
    Interval,
    bilipschitz_constant,
    min_self_distance_guard,
    mollify,
    reparametrize_constant_speed,
    tangent_field,
)
from .energies import tp_energy, tp_row_sums
from .variation import tp_gradient

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowConfig:
    max_steps: int = 500
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    guard_exclusion: float = 0.05
    guard_min_distance: float = 1e-3
    reproject_every: int = 5
    stop_grad_norm: float = 1e-6
    min_step: float = 1e-12
    smoothing_order: float = 4.0

    def __post_init__(self) -> None:
        if self.max_steps < 0 or self.reproject_every < 1:
            raise ValueError("max_steps must be >= 0 and reproject_every >= 1")
        if not (0.0 < self.backtrack_factor < 1.0) or not (0.0 < self.armijo_c < 1.0):
            raise ValueError("backtrack_factor and armijo_c must lie in (0, 1)")
        if min(self.step_init, self.guard_min_distance, self.stop_grad_norm, self.min_step) <= 0.0:
            raise ValueError("step sizes, guard distance and tolerances must be positive")
        if not (0.0 < self.guard_exclusion < 0.25):
            raise ValueError("guard_exclusion must lie in (0, 1/4)")


@dataclass(frozen=True)
class StepRecord:
    step: int
    energy: float
    step_size: float
    guard: float
    bilipschitz_lower: float
    max_local_energy: float
    reprojected: bool


@dataclass
class FlowTrace:
    records: list[StepRecord] = field(default_factory=list)
    stalled: bool = False
    converged: bool = False
    first_grad_norm: float = math.nan

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def is_monotone(self) -> bool:
        e = self.energies
        return bool(np.all(np.diff(e) < 0.0))


def sobolev_smoothing(field_: np.ndarray, order: float = 4.0) -> np.ndarray:
    """Apply (1 + |k|^order)^{-1} to each coordinate in Fourier space (k the integer frequency)."""
    n = field_.shape[0]
    k = np.abs(np.fft.fftfreq(n, d=1.0 / n))
    spec = np.fft.fft(field_, axis=0) / (1.0 + k**order)[:, None]
    return np.real(np.fft.ifft(spec, axis=0))


def _max_local_energy(rows: np.ndarray, radius: float) -> float:
    """Largest sum of row contributions over windows of the given parameter radius."""
    n = rows.size
    width = max(1, int(round(2.0 * radius * n)))
    prefix = np.concatenate([[0.0], np.cumsum(np.concatenate([rows, rows]))])
    sums = prefix[width:width + n] - prefix[:n]
    return float(sums.max())


def _bilipschitz_lower(c: Curve) -> float:
    return bilipschitz_constant(c)[0] / c.length()


def minimize(c0: Curve, params: EnergyParams, config: FlowConfig = FlowConfig(),
             callback: Callable[[int, Curve], None] | None = None) -> tuple[Curve, FlowTrace]:
    """Preconditioned gradient descent with Armijo backtracking.

    The search direction is the normal part of the TP gradient, smoothed by
    (1 + |k|^4)^{-1} to remove the stiffness of the high frequencies and projected
    onto the normal planes again. A step is accepted only if
    the Armijo condition holds for the candidate actually kept, the candidate passes
    the self-distance guard, and no sample moves by more than a quarter of the
    current guard distance. Every ``reproject_every`` steps the candidate is
    respaced to constant speed; if that spoils the Armijo test the unprojected
    candidate is tried instead, so the recorded energies strictly decrease.
    ``callback(step, curve)`` runs after every accepted step.
    """
    guard0 = min_self_distance_guard(c0, config.guard_exclusion)
    if guard0 < config.guard_min_distance:
        raise CurveError("initial curve fails the self-distance guard")
    cur = c0
    rows, infinite = tp_row_sums(cur, params)
    if infinite:
        raise CurveError("initial curve has infinite energy")
    energy = float(np.sum(rows))
    trace = FlowTrace()
    trace.records.append(StepRecord(0, energy, 0.0, guard0, _bilipschitz_lower(cur),
                                    _max_local_energy(rows, 1.0 / 16.0), False))
    guard = guard0
    tau = config.step_init
    for step in range(1, config.max_steps + 1):
        grad = tp_gradient(cur, params)
        # tangential motion only reshuffles samples and lets the flow exploit the grid
        tan = tangent_field(cur).vectors
        normal_grad = grad - np.sum(grad * tan, axis=1)[:, None] * tan
        grad_norm = float(np.max(np.abs(normal_grad)))
        if step == 1:
            trace.first_grad_norm = grad_norm
        if grad_norm <= config.stop_grad_norm * max(energy, 1e-300):
            trace.converged = True
            break
        direction = -sobolev_smoothing(normal_grad * cur.n, config.smoothing_order)
        direction -= np.sum(direction * tan, axis=1)[:, None] * tan
        slope = float(np.sum(grad * direction))
        if slope >= 0.0:
            trace.stalled = True
            break
        # displacement cap: a quarter of the guard distance
        tau = min(tau, 0.25 * guard / float(np.max(np.linalg.norm(direction, axis=1))))
        reproject = step % config.reproject_every == 0
        accepted = None
        while tau >= config.min_step:
            moved = cur.points + tau * direction
            options = [True, False] if reproject else [False]
            for proj in options:
                try:
                    cand = Curve(moved)
                    if proj:
                        cand = reparametrize_constant_speed(cand)
                except CurveError:
                    continue
                cand_rows, cand_inf = tp_row_sums(cand, params)
                if cand_inf:
                    continue
                cand_energy = float(np.sum(cand_rows))
                if cand_energy > energy + config.armijo_c * tau * slope or not cand_energy < energy:
                    continue
                cand_guard = min_self_distance_guard(cand, config.guard_exclusion)
                if cand_guard < config.guard_min_distance:
                    continue
                accepted = (cand, cand_rows, cand_energy, cand_guard, proj)
                break
            if accepted is not None:
                break
            tau *= config.backtrack_factor
        if accepted is None:
            trace.stalled = True
            log.info("flow stalled at step %d: no acceptable step above %g", step, config.min_step)
            break
        cur, rows, energy, guard, proj = accepted
        trace.records.append(StepRecord(step, energy, tau, guard, _bilipschitz_lower(cur),
                                        _max_local_energy(rows, 1.0 / 16.0), proj))
        if callback is not None:
            callback(step, cur)
        tau = min(2.0 * tau, config.step_init)
    return cur, trace


# ------------------------------------------------------------ concentration


@dataclass(frozen=True)
class ScaleLevel:
    radius: float
    intervals: tuple[Interval, ...]
    energies: np.ndarray
    flagged: tuple[int, ...]


@dataclass
class LocalEnergyProfile:
    """Half-restricted local energies TP(gamma, I x R/Z) on dyadic covers of R/Z."""

    levels: list[ScaleLevel]
    epsilon: float
    lam: float
    global_energy: float
    candidates: list[Interval]

    @property
    def bound(self) -> int:
        return int(math.floor(2.0 * self.lam / self.epsilon))

    @property
    def intervals(self) -> list[tuple[Interval, float]]:
        return [(iv, float(e)) for lvl in self.levels for iv, e in zip(lvl.intervals, lvl.energies)]


def _dyadic_cover(radius: float) -> list[Interval]:
    """Intervals of the given radius centred at multiples of the radius: each point lies in at most two."""
    count = int(round(1.0 / radius))
    return [Interval(i / count, radius) for i in range(count)]


def _interval_sums(rows: np.ndarray, intervals: Sequence[Interval]) -> np.ndarray:
    n = rows.size
    return np.array([float(np.sum(rows[iv.indices(n)])) for iv in intervals])


def _components(flags: np.ndarray) -> list[np.ndarray]:
    """Maximal runs of flagged cover indices on the cyclic index set."""
    m = flags.size
    if not flags.any():
        return []
    if flags.all():
        return [np.arange(m)]
    start = int(np.flatnonzero(~flags)[0])
    order = (start + np.arange(m)) % m
    runs, cur = [], []
    for i in order:
        if flags[i]:
            cur.append(i)
        elif cur:
            runs.append(np.array(cur))
            cur = []
    if cur:
        runs.append(np.array(cur))
    return runs


def _union_interval(cover: Sequence[Interval], run: np.ndarray) -> Interval:
    radius = cover[0].radius
    m = len(cover)
    first = cover[run[0]].center
    span = (run.size - 1) / m
    centre = (first + 0.5 * span) % 1.0
    return Interval(centre, min(0.5 * span + radius, 0.5 - 1e-12))


def _contains(outer: Interval, inner: Interval, slack: float = 1e-12) -> bool:
    off = abs((inner.center - outer.center + 0.5) % 1.0 - 0.5)
    return off + inner.radius <= outer.radius + slack


def detect_concentration(curves: Curve | Sequence[Curve], params: EnergyParams, epsilon: float,
                         lam: float, delta: float = 0.25, scales: int | None = None,
                         min_samples: int = 16) -> LocalEnergyProfile:
    """Flag intervals whose half-restricted energy reaches ``epsilon`` on dyadic scales.

    Scale m uses radius delta 2^{-m}; the default number of scales keeps at least
    ``min_samples`` samples in the finest interval. For a sequence of curves the
    last member stands in for the limit. Candidates are the flagged components of
    the finest scale that lie inside a flagged component of every coarser scale.
    Their number never exceeds floor(2 lam / epsilon), since the cover of each
    scale has multiplicity two.
    """
    seq = [curves] if isinstance(curves, Curve) else list(curves)
    if not seq:
        raise ValueError("need at least one curve")
    if not params.is_scale_invariant:
        raise ValueError("concentration detection needs p = q + 2")
    if epsilon <= 0.0 or epsilon > lam:
        raise ValueError("epsilon must lie in (0, lambda]")
    c = seq[-1]
    n = c.n
    rows, infinite = tp_row_sums(c, params)
    total = math.inf if infinite else float(np.sum(rows))
    for other in seq[:-1]:
        if tp_energy(other, params).value > lam:
            raise ValueError("a sequence member exceeds the energy bound lambda")
    if total > lam:
        raise ValueError(f"global energy {total:.6g} exceeds lambda {lam:.6g}")
    if scales is None:
        scales = max(0, int(math.floor(math.log2(2.0 * delta * n / min_samples))))
    levels: list[ScaleLevel] = []
    chain: list[list[Interval]] = []
    for m in range(scales + 1):
        radius = delta * 2.0 ** (-m)
        cover = _dyadic_cover(radius)
        energies = _interval_sums(rows, cover)
        flags = energies >= epsilon
        levels.append(ScaleLevel(radius, tuple(cover), energies, tuple(np.flatnonzero(flags))))
        chain.append([_union_interval(cover, run) for run in _components(flags)])
    candidates = [iv for iv in chain[-1]
                  if all(any(_contains(outer, iv) for outer in level) for level in chain[:-1])]
    profile = LocalEnergyProfile(levels, epsilon, lam, total, candidates)
    if len(candidates) > profile.bound:
        raise AssertionError("candidate count exceeds the covering bound 2 lambda / epsilon")
    return profile


def lsc_probe(c: Curve, params: EnergyParams, deltas: Sequence[float]) -> list[tuple[float, float]]:
    """(delta, TP(mollify(c, delta))) for decreasing deltas."""
    ds = list(deltas)
    if any(b >= a for a, b in zip(ds, ds[1:])):
        raise ValueError("deltas must be strictly decreasing")
    return [(float(d), tp_energy(mollify(c, d), params).value) for d in ds]
