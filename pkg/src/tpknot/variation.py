"""First variations: the exact gradient of the discrete TP sum and the
Euler-Lagrange split Q + R^1..R^7 of the tangent-field energy."""

from __future__ import annotations

from dataclasses import dataclass

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
    interval_bump,
    shortest_arc,
)
from .energies import e_energy, tp_energy
from .sobolev import SeminormSpec, seminorm_power


@dataclass(frozen=True, eq=False)
class VariationField:
    """A test field phi on the grid, vanishing outside ``support`` (None: no restriction)."""

    vectors: np.ndarray
    support: Interval | None = None

    def __post_init__(self) -> None:
        vec = np.array(self.vectors, dtype=np.float64)
        if vec.ndim != 2 or vec.shape[1] != 3:
            raise ValueError(f"expected an (n, 3) array, got shape {vec.shape}")
        if self.support is not None:
            outside = np.ones(vec.shape[0], dtype=bool)
            outside[self.support.indices(vec.shape[0])] = False
            if np.any(vec[outside] != 0.0):
                raise ValueError("variation field does not vanish outside its support")
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    def is_tangential(self, u: TangentField, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(np.sum(self.vectors * u.vectors, axis=1))) <= tol)

    def scaled(self, factor: float) -> "VariationField":
        return VariationField(factor * self.vectors, self.support)


def random_variation(n: int, support: Interval, rng: np.random.Generator, modes: int = 3,
                     u: TangentField | None = None) -> VariationField:
    """Smooth random field: bump on ``support`` times a random trigonometric vector polynomial.

    With ``u`` given, the field is projected onto the tangent planes of u. The result
    is scaled so that its largest displacement vector has unit length.
    """
    idx = support.indices(n)
    off = (idx / n - support.center + 0.5) % 1.0 - 0.5
    s = off / support.radius
    envelope = np.where(np.abs(s) < 1.0, (1.0 - s * s) ** 3, 0.0)
    poly = np.zeros((idx.size, 3))
    for k in range(modes):
        a, b = rng.normal(size=(2, 3))
        poly += np.outer(np.cos(np.pi * k * s), a) + np.outer(np.sin(np.pi * k * s), b)
    vec = np.zeros((n, 3))
    vec[idx] = envelope[:, None] * poly
    if u is not None:
        vec -= np.sum(vec * u.vectors, axis=1)[:, None] * u.vectors
    peak = float(np.max(np.linalg.norm(vec, axis=1)))
    if peak > 0.0:
        vec /= peak
    return VariationField(vec, support)


def rotation_field(c: Curve, axis) -> VariationField:
    """Infinitesimal rotation omega x gamma."""
    return VariationField(np.cross(np.asarray(axis, dtype=float), c.points))


def tp_gradient(c: Curve, params: EnergyParams) -> np.ndarray:
    """Exact gradient of the discrete TP sum with respect to the sample points.

    With T_i the central difference, D = gamma_i - gamma_j, W = T_i x D and
    G = |W|^q |T_i|^{1-q} |T_j| / |D|^p:
      dG/dD   = G (q W x T_i / |W|^2 - p D / |D|^2)
      dG/dT_i = G (q D x W / |W|^2 + (1 - q) T_i / |T_i|^2)
      dG/dT_j = G T_j / |T_j|^2
    and the T-derivatives are pushed through T_k = (gamma_{k+1} - gamma_{k-1}) n / 2.
    Pairs with W = 0 contribute nothing (G vanishes to order |W|^{q-1}).
    """
    n = c.n
    p, q = params.p, params.q
    pts = c.points
    T = derivative(c)
    speed2 = np.sum(T * T, axis=1)
    if np.min(speed2) == 0.0:
        raise CurveError("derivative vanishes; TP gradient undefined")
    cols = np.arange(n)

    def block(a, b):
        rows = np.arange(a, b)
        Ti = T[rows][:, None, :]
        D = pts[rows][:, None, :] - pts[None, :, :]
        W = np.cross(np.broadcast_to(Ti, D.shape), D)
        w2 = np.sum(W * W, axis=2)
        d2 = np.sum(D * D, axis=2)
        live = (rows[:, None] != cols[None, :]) & (w2 > 0.0)
        G = np.zeros_like(w2)
        G[live] = (w2[live] ** (q / 2.0) * speed2[rows][:, None].repeat(n, 1)[live] ** ((1.0 - q) / 2.0)
                   * np.sqrt(speed2)[None, :].repeat(b - a, 0)[live] / d2[live] ** (p / 2.0))
        inv_w2 = np.zeros_like(w2)
        inv_w2[live] = 1.0 / w2[live]
        inv_d2 = np.zeros_like(d2)
        inv_d2[live] = 1.0 / d2[live]
        WxT = np.cross(W, np.broadcast_to(Ti, W.shape))
        g_delta = G[:, :, None] * (q * WxT * inv_w2[:, :, None] - p * D * inv_d2[:, :, None])
        DxW = np.cross(D, W)
        g_ti = G[:, :, None] * (q * DxW * inv_w2[:, :, None]
                                + (1.0 - q) * Ti / speed2[rows][:, None, None])
        g_tj = G[:, :, None] * (T / speed2[:, None])[None, :, :]
        return (g_delta.sum(axis=1), g_delta.sum(axis=0), g_ti.sum(axis=1), g_tj.sum(axis=0))

    parts = map_blocks(block, row_blocks(n, block_size(n, 1 << 18)))
    row_delta = np.concatenate([pt[0] for pt in parts])
    row_t = np.concatenate([pt[2] for pt in parts])
    col_delta = np.zeros((n, 3))
    col_t = np.zeros((n, 3))
    for pt in parts:
        col_delta += pt[1]
        col_t += pt[3]
    h2 = 1.0 / (n * n)
    dT = (row_t + col_t) * h2
    grad = (row_delta - col_delta) * h2
    grad += (np.roll(dT, 1, axis=0) - np.roll(dT, -1, axis=0)) * (n / 2.0)
    return grad


def _phi_array(phi) -> np.ndarray:
    return phi.vectors if isinstance(phi, VariationField) else np.asarray(phi, dtype=float)


def tp_first_variation(c: Curve, params: EnergyParams, phi: VariationField | np.ndarray) -> float:
    """d/de TP(gamma + e phi) at e = 0, from the exact gradient of the discrete sum."""
    return float(np.sum(tp_gradient(c, params) * _phi_array(phi)))


def fd_variation_oracle(c: Curve, params: EnergyParams, phi: VariationField | np.ndarray,
                        h: float = 1e-5) -> float:
    """Central difference (TP(gamma + h phi) - TP(gamma - h phi)) / 2h."""
    if not (1e-7 <= h <= 1e-3):
        raise ValueError("step must lie in [1e-7, 1e-3]")
    vec = _phi_array(phi)
    if not np.any(vec):
        return 0.0
    plus = tp_energy(Curve(c.points + h * vec), params).value
    minus = tp_energy(Curve(c.points - h * vec), params).value
    return (plus - minus) / (2.0 * h)


def eta_weight(n: int, B: Interval) -> np.ndarray:
    """eta = theta' for the smooth step theta rising across B: a unit-mass bump on B."""
    return interval_bump(n, B)


@dataclass(frozen=True)
class ELBreakdown:
    Q: float
    R: tuple[float, ...]
    total: float
    eta_used: str
    clamped_pairs: int = 0


def _el_sums(u: np.ndarray, phi: np.ndarray, eta: np.ndarray, params: EnergyParams,
             rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, int]:
    """Sums of the integrands of Q, R^1..R^7 over rows x cols (weight 1/n^2)."""
    n = u.shape[0]
    p, q = params.p, params.q
    arc_u = ArcSums(u)
    arc_phi = ArcSums(phi)
    arc_uphi = ArcSums(np.sum(u * phi, axis=1))
    arc_u2 = ArcSums(np.sum(u * u, axis=1))
    arc_eta_u = ArcSums(eta[:, None] * u)
    mean_phi = phi.mean(axis=0)
    col_eta_u_m = (eta[:, None] * u) @ mean_phi

    def power(x, e):
        if e == 0.0:
            return np.ones_like(x)
        out = np.zeros_like(x)
        pos = x > 0.0
        out[pos] = x[pos] ** e
        return out

    def block(a, b):
        r = rows[a:b]
        start, steps = shortest_arc(r[:, None], cols[None, :], n)
        live = steps > 0
        rho = np.where(live, steps / n, 1.0)
        avg_u = arc_u.mean(start, steps)
        avg_phi = arc_phi.mean(start, steps)
        avg_uphi = arc_uphi.mean(start, steps)
        avg_u2 = arc_u2.mean(start, steps)
        avg_eta_u = arc_eta_u.mean(start, steps)
        ux = u[r][:, None, :]
        px = phi[r][:, None, :]
        du = avg_u - ux
        a_ = np.sum(du * du, axis=2)
        b_ = avg_u2 - 2.0 * np.sum(ux * avg_u, axis=2) + np.sum(ux * ux, axis=2)
        c_ = 2.0 * (avg_u2 - np.sum(avg_u * avg_u, axis=2))
        a_d = 2.0 * np.sum(du * (avg_phi - px), axis=2)
        b_d = 2.0 * (avg_uphi - np.sum(ux * avg_phi, axis=2) - np.sum(px * avg_u, axis=2)
                     + np.sum(ux * px, axis=2))
        c_d = 4.0 * (avg_uphi - np.sum(avg_u * avg_phi, axis=2))
        d_d = -2.0 * (avg_eta_u @ mean_phi)
        e_d = np.broadcast_to(-col_eta_u_m[r][:, None], a_.shape)
        f_d = np.broadcast_to(-col_eta_u_m[cols][None, :], a_.shape)
        rad = a_ - 0.25 * b_ * b_
        clamped = int(np.sum(live & (rad < -1e-12)))
        rad = np.maximum(rad, 0.0)
        k = 1.0 - 0.5 * c_
        weight = np.where(live, rho ** (q - p), 0.0)
        kp = k ** (-p / 2.0)
        kp2 = k ** (-(p + 2.0) / 2.0)
        a_pow = power(a_, (q - 2.0) / 2.0)
        r_pow = power(rad, (q - 2.0) / 2.0)
        r_q = rad ** (q / 2.0)
        terms = np.stack([
            0.5 * q * a_pow * kp * a_d,
            0.5 * q * (r_pow - a_pow) * kp * a_d,
            -0.25 * q * r_pow * kp * b_ * b_d,
            0.25 * p * r_q * kp2 * c_d,
            -0.5 * p * r_q * kp2 * d_d,
            q * r_pow * kp * (a_ - 0.5 * b_) * e_d,
            0.25 * q * r_pow * kp * b_ * d_d,
            r_q * kp * ((1.0 - q) * e_d + f_d),
        ])
        return (terms * weight).sum(axis=2), clamped

    parts = map_blocks(block, row_blocks(rows.size, block_size(cols.size, 1 << 17)))
    sums = np.concatenate([s for s, _ in parts], axis=1).sum(axis=1) / (n * n)
    return sums, sum(cl for _, cl in parts)


def el_breakdown(u: TangentField, params: EnergyParams, phi: VariationField,
                 eta: np.ndarray | None = None, eta_tag: str = "custom") -> ELBreakdown:
    """Q(u, phi) and the remainders R^1..R^7 of the first variation of E_eta.

    Assumes |u| = 1, a mean-zero field u and a tangential phi; under these the
    sum equals d/de E_eta((u + e phi)/|u + e phi|) at e = 0 for the discrete energy.
    """
    vec = u.vectors
    n = vec.shape[0]
    if not phi.is_tangential(u):
        raise ValueError("variation field must be tangential to u")
    eta_arr = np.zeros(n) if eta is None else np.asarray(eta, dtype=float)
    if eta is None:
        eta_tag = "none"
    idx = np.arange(n)
    sums, clamped = _el_sums(vec, phi.vectors, eta_arr, params, idx, idx)
    Q = float(sums[0])
    R = tuple(float(x) for x in sums[1:])
    return ELBreakdown(Q, R, Q + sum(R), eta_tag, clamped)


def e_energy_fd_variation(u: TangentField, params: EnergyParams, phi: VariationField,
                          eta: np.ndarray | None = None, h: float = 1e-5) -> float:
    """Central difference of E_eta along the renormalized curve u_e = (u + e phi)/|u + e phi|."""
    def energy(eps):
        moved = u.vectors + eps * phi.vectors
        moved = moved / np.linalg.norm(moved, axis=1)[:, None]
        return e_energy(moved, params, eta).value

    return (energy(h) - energy(-h)) / (2.0 * h)


def q_controls_seminorm_check(u: TangentField, B: Interval, params: EnergyParams):
    """([u]^q on B for W^{(p-q-1)/q, q}, Q_{BxB}(u, u), ratio of the two)."""
    if B.diameter >= 0.5:
        raise ValueError("need an interval of diameter < 1/2")
    vec = u.vectors
    n = vec.shape[0]
    semi = seminorm_power(vec, SeminormSpec.for_energy(params, B))
    idx = np.sort(B.indices(n))
    sums, _ = _el_sums(vec, vec, np.zeros(n), params, idx, idx)
    q_uu = float(sums[0])
    if q_uu == 0.0:
        return semi, q_uu, 0.0 if semi == 0.0 else np.inf
    return semi, q_uu, semi / q_uu
