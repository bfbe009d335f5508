import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpknot.curve_core import (
    Curve,
    CurveError,
    EnergyParams,
    Interval,
    TangentField,
    bilipschitz_constant,
    derivative,
    ftc_identity_check,
    geodesic_distance,
    min_self_distance_guard,
    mollify,
    reparametrize_constant_speed,
    tangent_field,
)
from tpknot.zoo import make_circle, make_double_segment, make_ellipse, make_trefoil

UNIT_SPEED_RADIUS = 1.0 / (2.0 * np.pi)


def _chords(c):
    return np.linalg.norm(c.edges(), axis=1)


# ------------------------------------------------------------------ types


def test_curve_rejects_bad_input():
    with pytest.raises(CurveError):
        Curve(np.zeros((7, 3)) + np.arange(7)[:, None])
    with pytest.raises(CurveError):
        Curve(np.ones((10, 3)))
    with pytest.raises(CurveError):
        Curve(np.zeros((10, 2)))
    pts = make_circle(16).points.copy()
    pts[3, 0] = np.nan
    with pytest.raises(CurveError):
        Curve(pts)


def test_curve_points_are_read_only():
    c = make_circle(16)
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0


def test_curve_json_round_trip_is_exact():
    c = make_trefoil(64)
    back = Curve.from_dict(json.loads(json.dumps(c.to_dict())))
    assert np.array_equal(back.points, c.points)


def test_curve_json_checks_sample_count():
    data = make_circle(16).to_dict()
    data["n"] = 17
    with pytest.raises(CurveError):
        Curve.from_dict(data)


def test_tangent_field_is_unit():
    u = tangent_field(make_trefoil(128))
    assert np.allclose(np.linalg.norm(u.vectors, axis=1), 1.0, atol=1e-12)
    with pytest.raises(CurveError):
        TangentField(2.0 * u.vectors)


@pytest.mark.parametrize("p,q", [(4.0, 2.0), (5.0, 3.0), (4.5, 2.2), (3.5, 1.5)])
def test_energy_params_accepts_admissible(p, q):
    EnergyParams(p, q)


@pytest.mark.parametrize("p,q", [(3.0, 1.0), (3.9, 2.0), (5.0, 2.0), (4.0, 0.5)])
def test_energy_params_rejects_inadmissible(p, q):
    with pytest.raises(ValueError):
        EnergyParams(p, q)


def test_interval_validates_radius_and_wraps_center():
    with pytest.raises(ValueError):
        Interval(0.3, 0.5)
    with pytest.raises(ValueError):
        Interval(0.3, 0.0)
    assert Interval(1.25, 0.1).center == 0.25


def test_interval_indices_wrap_and_are_half_open():
    idx = Interval(0.0, 0.125).indices(16)
    assert list(idx) == [14, 15, 0, 1]


# ------------------------------------------------------- geodesic distance


@pytest.mark.parametrize("x,y,expected", [(0.1, 0.9, 0.2), (0.25, 0.25, 0.0), (0.0, 0.5, 0.5)])
def test_geodesic_distance_examples(x, y, expected):
    assert geodesic_distance(x, y) == pytest.approx(expected, abs=1e-15)


unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


@given(unit, unit, unit)
def test_geodesic_distance_is_a_metric(x, y, z):
    dxy, dyz, dxz = geodesic_distance(x, y), geodesic_distance(y, z), geodesic_distance(x, z)
    assert 0.0 <= dxy <= 0.5
    assert dxy == geodesic_distance(y, x)
    assert dxz <= dxy + dyz + 1e-15


# ---------------------------------------------------------------- derivative


def test_derivative_of_circle_has_magnitude_two_pi():
    g = derivative(make_circle(256))
    assert np.max(np.abs(np.linalg.norm(g, axis=1) - 2.0 * np.pi)) < 1e-3


def test_derivative_error_is_second_order():
    errs = []
    for n in (64, 128):
        t = np.arange(n) / n
        c = Curve(np.column_stack([np.cos(2 * np.pi * t), np.sin(4 * np.pi * t), np.sin(2 * np.pi * t)]))
        exact = 2 * np.pi * np.column_stack([-np.sin(2 * np.pi * t), 2 * np.cos(4 * np.pi * t),
                                             np.cos(2 * np.pi * t)])
        errs.append(np.max(np.abs(derivative(c) - exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)


def test_derivative_of_double_segment_flips_sign_at_the_folds():
    n = 64
    g = derivative(make_double_segment(n))
    away = [i for i in range(n) if i % (n // 2) not in (0,)]
    mags = np.linalg.norm(g[away], axis=1)
    assert np.allclose(mags, mags[0], atol=1e-14)
    assert np.allclose(g[1:n // 2], -g[n // 2 + 1:][::-1], atol=1e-14)
    assert np.allclose(g[[0, n // 2]], 0.0, atol=1e-14)


# ------------------------------------------------------ reparametrization


def test_reparametrize_clustered_circle():
    n = 256
    s = np.arange(n) / n
    t = s + 0.1 * np.sin(2 * np.pi * s) / (2 * np.pi)
    c = Curve(np.column_stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t), np.zeros(n)]))
    out = reparametrize_constant_speed(c)
    ch = _chords(out)
    assert np.var(ch / ch.mean()) < 1e-10
    assert out.n == n


def test_reparametrize_fixed_point():
    c = make_circle(128)
    assert np.max(np.abs(reparametrize_constant_speed(c).points - c.points)) < 1e-12


def test_reparametrize_ellipse_equal_chords_and_idempotent():
    raw = Curve(np.column_stack([2 * np.cos(np.linspace(0, 2 * np.pi, 200, endpoint=False)),
                                 np.sin(np.linspace(0, 2 * np.pi, 200, endpoint=False)), np.zeros(200)]))
    out = reparametrize_constant_speed(raw)
    ch = _chords(out)
    assert np.max(np.abs(ch / ch.mean() - 1.0)) < 1e-10
    again = reparametrize_constant_speed(out)
    assert np.max(np.abs(again.points - out.points)) < 1e-10


# ---------------------------------------------------------------- mollify


def test_mollify_converges_monotonically():
    c = make_trefoil(1024)
    errs = [np.max(np.linalg.norm(mollify(c, d).points - c.points, axis=1)) for d in (0.05, 0.01, 0.002)]
    assert errs[0] > errs[1] > errs[2]


def test_mollify_shrinks_circle():
    c = make_circle(256)
    r = np.linalg.norm(mollify(c, 0.05).points, axis=1)
    assert np.ptp(r) < 1e-12
    assert r[0] < 1.0


def test_mollify_rejects_unresolved_width():
    with pytest.raises(ValueError):
        mollify(make_circle(64), 0.01)
    with pytest.raises(ValueError):
        mollify(make_circle(64), 0.3)


def test_mollify_commutes_with_rigid_motions(rng):
    c = make_trefoil(256)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    b = rng.normal(size=3)
    lhs = mollify(c.transformed(q, b), 0.03).points
    rhs = mollify(c, 0.03).points @ q.T + b
    assert np.max(np.abs(lhs - rhs)) < 1e-12


# ---------------------------------------------------------- bilipschitz


def test_bilipschitz_on_unit_speed_circle():
    lower, upper = bilipschitz_constant(make_circle(512, UNIT_SPEED_RADIUS))
    assert lower == pytest.approx(2.0 / np.pi, rel=1e-9)
    assert lower <= upper <= 1.0 + 10.0 / 512


def test_bilipschitz_on_straight_piece():
    n = 256
    c = make_double_segment(n)
    # a window inside one straight leg; the tent has unit speed
    lower, upper = bilipschitz_constant(c, Interval(0.25, 0.1))
    assert lower == pytest.approx(1.0, abs=1e-12)
    assert upper == pytest.approx(1.0, abs=1e-12)


def test_bilipschitz_on_double_segment_is_zero():
    lower, _ = bilipschitz_constant(make_double_segment(256))
    assert lower == pytest.approx(0.0, abs=1e-12)


def test_bilipschitz_rejects_tiny_window():
    with pytest.raises(ValueError):
        bilipschitz_constant(make_circle(64), Interval(0.0, 0.01))


@pytest.mark.parametrize("make", [make_ellipse, make_trefoil])
def test_bilipschitz_lower_below_upper(make):
    c = make(256)
    c = c.transformed(scale=1.0 / c.length())
    lower, upper = bilipschitz_constant(c)
    assert 0.0 < lower <= upper <= 1.0 + 10.0 / 256


# ------------------------------------------------------------------ FTC


def test_ftc_circle_antipodal():
    assert ftc_identity_check(make_circle(512, UNIT_SPEED_RADIUS), 0.0, 0.5) < 1e-6


def test_ftc_neighbours():
    c = make_trefoil(256)
    c = c.transformed(scale=1.0 / c.length())
    assert ftc_identity_check(c, 0.3, 0.3 + 1 / 256) < 1e-10


def test_ftc_same_sample_rejected():
    with pytest.raises(ValueError):
        ftc_identity_check(make_circle(64), 0.1, 0.1)


def test_ftc_residual_decreases_at_least_linearly(rng):
    pairs = [rng.choice(128, 2, replace=False) / 128 for _ in range(100)]
    res = []
    for n in (128, 256, 512):
        c = make_trefoil(n)
        res.append(max(ftc_identity_check(c, x, y) for x, y in pairs))
    assert res[0] / res[1] >= 2.0 and res[1] / res[2] >= 2.0


# ---------------------------------------------------------------- guard


def test_guard_on_unit_speed_circle():
    # 0.1 n must be an integer so the exclusion boundary sits on a sample pair
    value = min_self_distance_guard(make_circle(640, UNIT_SPEED_RADIUS), 0.1)
    assert value == pytest.approx(2.0 * UNIT_SPEED_RADIUS * np.sin(0.1 * np.pi), rel=1e-12)
    assert value == pytest.approx(0.0984, abs=1e-4)


def test_guard_on_double_segment_is_zero():
    assert min_self_distance_guard(make_double_segment(128), 0.1) == pytest.approx(0.0, abs=1e-15)


def test_guard_on_trefoil_is_refinement_stable():
    a = min_self_distance_guard(make_trefoil(1024), 0.05)
    b = min_self_distance_guard(make_trefoil(2048), 0.05)
    assert a > 0.0
    assert abs(a - b) / b < 0.01


def test_guard_rejects_bad_exclusion():
    with pytest.raises(ValueError):
        min_self_distance_guard(make_circle(64), 0.3)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-3.0, 3.0))
def test_guard_scales_linearly(scale, shift):
    c = make_trefoil(64)
    moved = c.transformed(scale=scale, shift=[shift, 0.0, 0.0])
    assert min_self_distance_guard(moved, 0.1) == pytest.approx(scale * min_self_distance_guard(c, 0.1), rel=1e-12)
