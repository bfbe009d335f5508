import numpy as np
import pytest

from tpknot.curve_core import (
    CurveError,
    EnergyParams,
    Interval,
    bilipschitz_constant,
    derivative,
    min_self_distance_guard,
    tangent_field,
)
from tpknot.energies import k_factor, tangent_point_radii, tp_energy, tp_row_sums
from tpknot.zoo import (
    LOGLOG_WINDOW,
    ZOO,
    make,
    make_circle,
    make_double_segment,
    make_ellipse,
    make_loglog_curve,
    make_perturbed_circle,
    make_pulltight_family,
    make_trefoil,
    pulltight_splice,
)

CRITICAL = EnergyParams(4.0, 2.0)


# --------------------------------------------------------------- registry


def test_every_entry_carries_provenance():
    for name, entry in ZOO.items():
        assert entry.name == name
        assert entry.facts
        assert all(f.provenance for f in entry.facts)


@pytest.mark.parametrize("name", ["circle", "perturbed_circle", "ellipse", "double_segment", "trefoil"])
def test_generators_are_deterministic(name):
    a, b = make(name), make(name)
    assert np.array_equal(a.points, b.points)
    assert a.n == ZOO[name].default_n


def test_unknown_name_is_rejected():
    with pytest.raises(ValueError):
        make("figure_eight")


def test_minimum_sample_counts():
    with pytest.raises(ValueError):
        make_circle(4)
    with pytest.raises(ValueError):
        make_loglog_curve(512)
    with pytest.raises(ValueError):
        make_double_segment(65)


# ----------------------------------------------------------------- circle


def test_circle_facts():
    c = make_circle(256)
    assert tp_energy(c, CRITICAL).value == pytest.approx(np.pi**2, rel=1e-2)
    radii = tangent_point_radii(make_circle(512))
    assert np.nanmax(np.abs(radii - 1.0)) < 1e-6


def test_circle_energy_is_radius_independent():
    a = tp_energy(make_circle(256), CRITICAL).value
    b = tp_energy(make_circle(256, 3.0), CRITICAL).value
    assert abs(a - b) <= 1e-12 * a


def test_circle_guard_is_the_shortest_admissible_chord():
    # the closest admissible pair sits exactly at the exclusion distance
    for exclusion in (0.125, 0.2, 0.25 - 1e-9):
        expected = 2.0 * np.sin(np.pi * np.ceil(exclusion * 256 - 1e-6) / 256)
        assert min_self_distance_guard(make_circle(256), exclusion) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        min_self_distance_guard(make_circle(256), 0.25)


def test_circle_k_factor_closed_form():
    u = tangent_field(make_circle(512))
    for d in (0.1, 0.25, 0.4):
        angle = 2 * np.pi * d
        assert k_factor(u, 0.0, d) == pytest.approx((2 * np.sin(angle / 2) / angle) ** 2, abs=1e-3)


# --------------------------------------------------------- double segment


@pytest.mark.parametrize("pq", [(4.0, 2.0), (5.0, 3.0)])
def test_double_segment_energy_is_zero(pq):
    assert tp_energy(make_double_segment(256), EnergyParams(*pq)).value < 1e-12


def test_double_segment_is_folded():
    c = make_double_segment(256)
    assert bilipschitz_constant(c)[0] == 0.0
    assert min_self_distance_guard(c, 0.1) == 0.0


# ------------------------------------------------------------------ loglog


@pytest.mark.slow
def test_loglog_energy_is_finite_and_refinement_stable():
    a = tp_energy(make_loglog_curve(2048), CRITICAL)
    b = tp_energy(make_loglog_curve(4096), CRITICAL)
    assert not a.infinite and not b.infinite
    assert a.value == pytest.approx(b.value, rel=0.05)


def test_loglog_window_is_bilipschitz():
    lower, _ = bilipschitz_constant(make_loglog_curve(2048), LOGLOG_WINDOW)
    assert lower >= 0.2


def test_loglog_tangent_variation_near_zero_does_not_shrink():
    variations = []
    for n in (1024, 2048, 4096, 8192):
        g = derivative(make_loglog_curve(n))
        u = g / np.linalg.norm(g, axis=1)[:, None]
        idx = Interval(0.0, 0.01).indices(n)
        variations.append(np.sum(np.linalg.norm(np.diff(u[idx], axis=0), axis=1)))
    assert all(b >= a * (1 - 1e-9) for a, b in zip(variations, variations[1:]))


# ----------------------------------------------------------------- trefoil


def test_trefoil_energy_is_positive_and_refinement_stable():
    a = tp_energy(make_trefoil(512), CRITICAL).value
    b = tp_energy(make_trefoil(1024), CRITICAL).value
    assert a > 0.0
    assert a == pytest.approx(b, rel=0.02)


def test_trefoil_scale_argument():
    c = make_trefoil(256, scale=2.5)
    assert np.allclose(c.points, 2.5 * make_trefoil(256).points, rtol=0.0, atol=1e-13)


# --------------------------------------------------------------- pull-tight


@pytest.mark.slow
def test_pulltight_energies_are_bounded():
    energies = [tp_energy(make_pulltight_family(2048, k), CRITICAL).value for k in range(2, 7)]
    assert max(energies) <= 1.25 * min(energies)


@pytest.mark.slow
def test_pulltight_splice_keeps_an_energy_floor():
    n = 2048
    local, radii = [], []
    for k in range(2, 7):
        rows, _ = tp_row_sums(make_pulltight_family(n, k), CRITICAL)
        splice = pulltight_splice(n, k)
        local.append(float(np.sum(rows[splice.indices(n)])))
        radii.append(splice.radius)
    assert all(b < a for a, b in zip(radii, radii[1:]))
    assert min(local) >= 0.5 * max(local)


def test_pulltight_rejects_unresolved_splice():
    with pytest.raises(CurveError):
        make_pulltight_family(256, 8)


def test_pulltight_rejects_negative_k():
    with pytest.raises(ValueError):
        make_pulltight_family(256, -1)


# ----------------------------------------------------------------- others


def test_ellipse_and_perturbed_circle_are_embedded():
    for c in (make_ellipse(256), make_perturbed_circle(256)):
        assert min_self_distance_guard(c, 0.1) > 0.0
        assert np.isfinite(tp_energy(c, CRITICAL).value)
