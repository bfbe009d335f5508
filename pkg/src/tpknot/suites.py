"""Property suites run by ``tpknot verify`` over the fixture corpus at default resolutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curve_core import (
    EnergyParams,
    Interval,
    derivative,
    ftc_identity_check,
    tangent_field,
)
from .energies import k_factor, tp_energy, tp_equals_e_check, tp_row_sums
from .flow import detect_concentration
from .gluing import distance_to_images, luckhaus_estimate_report, luckhaus_glue, trace_mismatch
from .sobolev import (
    SeminormSpec,
    embedding_check,
    gap_estimate_report,
    identification_averaged,
    identification_taylor,
    seminorm_power,
)
from .variation import (
    e_energy_fd_variation,
    el_breakdown,
    eta_weight,
    fd_variation_oracle,
    random_variation,
    tp_first_variation,
)
from .zoo import (
    make_circle,
    make_ellipse,
    make_perturbed_circle,
    make_pulltight_family,
    make_trefoil,
    pulltight_splice,
)

CRITICAL = EnergyParams(4.0, 2.0)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "detail": self.detail}


def _below(name: str, value: float, threshold: float, detail: str = "") -> Check:
    return Check(name, bool(value < threshold), float(value), float(threshold), detail)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0.0 else abs(a)


def _random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q


def suite_identities(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(1000, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    w = rng.normal(size=(1000, 3))
    lagrange = np.abs(np.sum(np.cross(v, w) ** 2, axis=1) - (np.sum(w * w, axis=1) - np.sum(v * w, axis=1) ** 2))
    scale = np.maximum(1.0, np.sum(w * w, axis=1))
    checks = [_below("lagrange identity, 1000 random pairs", float(np.max(lagrange / scale)), 1e-14)]

    circle = make_circle(512)
    u = tangent_field(circle)
    worst = 0.0
    for _ in range(200):
        x, y = rng.uniform(0.0, 1.0, 2)
        if int(x * 512) == int(y * 512):
            continue
        i, j = int(x * 512), int(y * 512)
        d = 2.0 * np.pi * min((j - i) % 512, (i - j) % 512) / 512
        worst = max(worst, abs(k_factor(u, i / 512, j / 512) - (2.0 * np.sin(d / 2.0) / d) ** 2))
    checks.append(_below("k factor on the circle vs (2 sin(d/2)/d)^2", worst, 1e-3))

    for name, c in (("circle", circle), ("trefoil", make_trefoil(512))):
        res = max(ftc_identity_check(c, *rng.uniform(0.0, 1.0, 2)) for _ in range(100))
        checks.append(_below(f"FTC identity residual, {name}", res, 1e-3))

    for name, make in (("circle", make_circle), ("ellipse", make_ellipse), ("trefoil", make_trefoil)):
        coarse = tp_equals_e_check(make(256), CRITICAL)
        fine = tp_equals_e_check(make(512), CRITICAL)
        checks.append(_below(f"TP = E discrepancy halves, {name}", fine / coarse, 0.5,
                             f"n=256: {coarse:.3e}, n=512: {fine:.3e}"))
    return checks


def suite_invariance(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []
    for name, c in (("trefoil", make_trefoil(256)), ("perturbed circle", make_perturbed_circle(256))):
        ref = tp_energy(c, CRITICAL).value
        variants = {
            "scale 0.5": c.transformed(scale=0.5),
            "scale 3": c.transformed(scale=3.0),
            "rotation + translation": c.transformed(_random_rotation(rng), rng.normal(size=3)),
            "reversal": c.reversed(),
        }
        for label, other in variants.items():
            checks.append(_below(f"{name}: {label}", _rel(tp_energy(other, CRITICAL).value, ref), 1e-12))
    return checks


def suite_gap() -> list[Check]:
    B = Interval(0.1, 0.125)
    spec = SeminormSpec.for_energy(CRITICAL, B)
    checks = []
    for name, make in (("ellipse", make_ellipse), ("trefoil", make_trefoil),
                       ("perturbed circle", make_perturbed_circle)):
        consts = []
        for n in (256, 512):
            c = make(n)
            g = derivative(c)
            semi = seminorm_power(g, spec)
            consts.append({
                "taylor identification": identification_taylor(c, spec, B) / semi,
                "averaged identification": identification_averaged(g, spec, B) / semi,
                "embedding": embedding_check(g, B, 0.5, 0.25, 2.0, 2.0)[2],
                "gap estimate": gap_estimate_report(c, B, CRITICAL).empirical_C,
            })
        for key in consts[0]:
            a, b = consts[0][key], consts[1][key]
            ok = np.isfinite(a) and np.isfinite(b) and b > 0.0
            checks.append(_below(f"{name}: {key} constant, n vs 2n", _rel(a, b) if ok else np.inf, 0.2,
                                 f"{a:.6g} vs {b:.6g}"))
    return checks


def suite_el(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []
    c = make_ellipse(128)
    u = tangent_field(c, "edge")
    eta = eta_weight(128, Interval(0.25, 0.2))
    for q in (2.0, 2.5):
        params = EnergyParams(q + 2.0, q)
        phi = random_variation(128, Interval(0.3, 0.1), rng, u=u)
        br = el_breakdown(u, params, phi, eta, "bump")
        fd = e_energy_fd_variation(u, params, phi, eta)
        checks.append(_below(f"EL breakdown vs finite differences, q={q:g}", _rel(br.total, fd), 1e-4))
        if q == 2.0:
            checks.append(_below("R^1 vanishes at q=2", abs(br.R[0]), 1e-14))
    trefoil = make_trefoil(128)
    worst = 0.0
    for _ in range(5):
        centre = rng.uniform(0.0, 1.0)
        phi = random_variation(128, Interval(centre, 0.15), rng)
        worst = max(worst, _rel(tp_first_variation(trefoil, CRITICAL, phi),
                                fd_variation_oracle(trefoil, CRITICAL, phi, 1e-5)))
    checks.append(_below("TP gradient vs finite differences, trefoil", worst, 1e-5))
    return checks


def _const(vec):
    vec = np.asarray(vec, dtype=float)
    return lambda x: np.tile(vec, (np.size(x), 1))


def suite_gluing() -> list[Check]:
    checks = []
    deltas = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
    s, p = 0.9, 2.0
    lhs = [luckhaus_estimate_report(_const([1.0, 0, 0]), _const([0.0, 0, 0]), d, s, p, 1.5,
                                    spacing=d / 32).lhs for d in deltas]
    slope = float(np.polyfit(np.log(deltas), np.log(lhs), 1)[0])
    target = 1.0 - s * p
    checks.append(_below("mismatch-only log-log slope vs 1 - sp", abs(slope - target) / abs(target), 0.1,
                         f"slope {slope:.4f}, expected {target:.4f}"))

    def tangent(x):
        return np.column_stack([-np.sin(x), np.cos(x), np.zeros_like(x)])

    def rotated(x):
        return np.column_stack([-np.sin(x + 0.3), np.cos(x + 0.3), np.zeros_like(x)])

    glued = luckhaus_glue(tangent, rotated, 1 / 8, spacing=1 / 256)
    reg = glued.region()
    outer_err = float(np.max(np.abs(glued.values[reg["outer"]] - glued.u_values[reg["outer"]])))
    inner_x = glued.x[reg["inner"]]
    inner_err = float(np.max(np.abs(glued.values[reg["inner"]] - rotated(inner_x / (1 - 1 / 8)))))
    checks.append(Check("w = u off [-1, 1] (sample-exact)", outer_err == 0.0, outer_err, 0.0))
    checks.append(Check("w = v(x/(1 - delta)) inside (sample-exact)", inner_err == 0.0, inner_err, 0.0))
    excess = float(np.max(distance_to_images(glued)) - trace_mismatch(glued))
    checks.append(_below("dist(w, K) <= trace mismatch", excess, 1e-12))
    return checks


def suite_concentration(n: int = 2048) -> list[Check]:
    curves = [make_pulltight_family(n, k) for k in range(2, 7)]
    energies = [tp_energy(c, CRITICAL).value for c in curves]
    lam = 1.01 * max(energies)
    rows, _ = tp_row_sums(curves[0], CRITICAL)
    splice_energy = float(np.sum(rows[pulltight_splice(n, 2).indices(n)]))
    eps = 0.5 * splice_energy
    tight = pulltight_splice(n, 6)
    scales = int(np.floor(np.log2(0.25 / tight.radius)))
    checks = [_below("pull-tight energies within 25%", (max(energies) - min(energies)) / min(energies), 0.25)]
    prof = detect_concentration(curves, CRITICAL, eps, lam, scales=scales)
    hits = [iv for iv in prof.candidates if abs((iv.center + 0.5) % 1.0 - 0.5) <= iv.radius]
    ok = len(prof.candidates) == 1 and len(hits) == 1
    checks.append(Check("one persistent candidate at the splice", ok, float(len(prof.candidates)), 1.0))
    worst = 0.0
    for c in curves:
        pr = detect_concentration(c, CRITICAL, eps, lam, scales=scales)
        worst = max(worst, len(pr.candidates) / pr.bound)
    checks.append(Check("candidate count <= 2 lambda / epsilon", worst <= 1.0, worst, 1.0))
    return checks


SUITES: dict[str, Callable[[], list[Check]]] = {
    "identities": suite_identities,
    "invariance": suite_invariance,
    "gap": suite_gap,
    "el": suite_el,
    "gluing": suite_gluing,
    "concentration": suite_concentration,
}


def run_suite(name: str) -> dict[str, list[Check]]:
    if name == "all":
        return {key: fn() for key, fn in SUITES.items()}
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    return {name: SUITES[name]()}
