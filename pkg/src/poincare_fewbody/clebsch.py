"""SU(2) and two-body Poincare Clebsch-Gordan coefficients, canonical spin.

Coupled two-body states are labelled by total momentum P, relative momentum
magnitude k (equivalently the free invariant mass M0(k) = w1(k) + w2(k)),
orbital l, channel spin s, total spin j and projection mu. They are normalised
to delta(P' - P) delta(k' - k) / k^2. The coefficient returned by
:func:`poincare_cg` is the factor multiplying delta(P - p1 - p2) delta(k - |k(p1,p2)|) / k^2:

    sqrt(w1(k) w2(k) E(P) / (w1(p1) w2(p2) M0(k)))
      * sum D^{j1}[R_wc(B_c(P), k1)]_{mu1 nu1} D^{j2}[R_wc(B_c(P), k2)]_{mu2 nu2}
            <j1 nu1 j2 nu2 | s ms> <l ml s ms | j mu> Y_l^ml(k_hat)

with k1 = (w1(k), k), k2 = (w2(k), -k). Phases follow Condon-Shortley for the
SU(2) factors and scipy's spherical harmonics.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

import numpy as np
from scipy.special import sph_harm_y

from .errors import DomainError, ParameterError
from .irreps import BasisForm, IrrepLabel
from .kinematics import (
    LorentzTransform,
    SpinKind,
    _twice,
    canonical_boost_spinor,
    on_shell,
    spin_projections,
    spinor_to_matrix,
    wigner_d,
    wigner_rotation_spinor,
)
from .numerics import QuadratureGrid, gauss_legendre

__all__ = [
    "DegeneracyLabel",
    "CoupledLabel",
    "su2_cg",
    "su2_cg_table",
    "spherical_harmonic",
    "relative_momentum",
    "free_mass",
    "poincare_cg",
    "poincare_cg_array",
    "angular_grid",
    "cg_orthonormality_check",
    "intertwining_deviation",
]


@dataclass(frozen=True)
class DegeneracyLabel:
    l: int
    s: float


@dataclass(frozen=True)
class CoupledLabel:
    m: float
    j: float
    d: DegeneracyLabel
    p: tuple[float, float, float]
    mu: float


def _half(x) -> int:
    t = 2 * float(x)
    if abs(t - round(t)) > 1e-9:
        raise ParameterError(f"{x!r} is not a half-integer")
    return int(round(t))


@lru_cache(maxsize=None)
def _cg_doubled(tj1: int, tm1: int, tj2: int, tm2: int, tj: int, tm: int) -> float:
    if min(tj1, tj2, tj) < 0 or tm1 + tm2 != tm:
        return 0.0
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tm) > tj:
        return 0.0
    if (tj1 + tm1) % 2 or (tj2 + tm2) % 2 or (tj + tm) % 2:
        return 0.0
    if tj > tj1 + tj2 or tj < abs(tj1 - tj2) or (tj1 + tj2 + tj) % 2:
        return 0.0
    # Racah's closed form in integer arithmetic
    a = (tj1 + tj2 - tj) // 2
    b = (tj1 - tj2 + tj) // 2
    c = (-tj1 + tj2 + tj) // 2
    jj = (tj1 + tj2 + tj) // 2 + 1
    pre = Fraction((tj + 1) * factorial(a) * factorial(b) * factorial(c), factorial(jj))
    pre *= (
        factorial((tj1 + tm1) // 2) * factorial((tj1 - tm1) // 2)
        * factorial((tj2 + tm2) // 2) * factorial((tj2 - tm2) // 2)
        * factorial((tj + tm) // 2) * factorial((tj - tm) // 2)
    )
    total = Fraction(0)
    for k in range(0, a + 1):
        d = [a - k, (tj1 - tm1) // 2 - k, (tj2 + tm2) // 2 - k,
             (tj - tj2 + tm1) // 2 + k, (tj - tj1 - tm2) // 2 + k]
        if min(d) < 0:
            continue
        den = factorial(k)
        for x in d:
            den *= factorial(x)
        total += Fraction((-1) ** k, den)
    return float(total) * sqrt(pre)


def su2_cg(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1 j2 m2 | j m> in the Condon-Shortley convention (0 when not allowed)."""
    return _cg_doubled(_half(j1), _half(m1), _half(j2), _half(m2), _half(j), _half(m))


@lru_cache(maxsize=None)
def _cg_table(tj1: int, tj2: int, tj: int) -> np.ndarray:
    t = np.zeros((tj1 + 1, tj2 + 1, tj + 1))
    for a in range(tj1 + 1):
        for b in range(tj2 + 1):
            for c in range(tj + 1):
                t[a, b, c] = _cg_doubled(tj1, tj1 - 2 * a, tj2, tj2 - 2 * b, tj, tj - 2 * c)
    t.setflags(write=False)
    return t


def su2_cg_table(j1, j2, j) -> np.ndarray:
    """Array C[m1, m2, m] over projections ordered from +j down to -j."""
    return _cg_table(_half(j1), _half(j2), _half(j))


def spherical_harmonic(l: int, ml, khat) -> np.ndarray:
    """Y_l^ml at unit vectors ``khat`` (..., 3)."""
    khat = np.asarray(khat, dtype=float)
    theta = np.arccos(np.clip(khat[..., 2], -1.0, 1.0))
    phi = np.arctan2(khat[..., 1], khat[..., 0])
    return sph_harm_y(l, int(ml), theta, phi)


def free_mass(m1: float, m2: float, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return np.sqrt(m1 * m1 + k * k) + np.sqrt(m2 * m2 + k * k)


def _minkowski_mass(p4) -> np.ndarray:
    p4 = np.asarray(p4, dtype=float)
    m2 = p4[..., 0] ** 2 - np.sum(p4[..., 1:] ** 2, axis=-1)
    if np.any(m2 <= 0):
        raise DomainError("four-momentum is not timelike")
    return np.sqrt(m2)


def relative_momentum(p1, p2) -> np.ndarray:
    """Spatial part of B_c(P)^{-1} p1 with P = p1 + p2 (batched over leading axes)."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    _minkowski_mass(p1)
    _minkowski_mass(p2)
    tot = p1 + p2
    mtot = _minkowski_mass(tot)
    # inverse canonical boost written out in closed form
    e = tot[..., 0]
    pv = tot[..., 1:]
    q = p1[..., 1:]
    proj = np.sum(pv * q, axis=-1)
    coef = proj / (mtot * (e + mtot)) - p1[..., 0] / mtot
    return q + coef[..., None] * pv


def _coupling_tensor(j1, j2, l, s, j) -> np.ndarray:
    """T[nu1, nu2, ml, mu] = sum_ms <j1 nu1 j2 nu2|s ms><l ml s ms|j mu>."""
    a = su2_cg_table(j1, j2, s)
    b = su2_cg_table(l, s, j)
    return np.einsum("xyS,LSm->xyLm", a, b)


def poincare_cg_array(j1, j2, m1: float, m2: float, l: int, s, j, P, kvec) -> np.ndarray:
    """Coefficient array G[..., mu1, mu2, mu] at total momentum P and relative momentum k.

    P and kvec broadcast over leading axes; projections ordered from +j down to -j.
    """
    if not (m1 > 0 and m2 > 0):
        raise ParameterError("masses must be positive")
    P = np.asarray(P, dtype=float)
    kvec = np.asarray(kvec, dtype=float)
    P, kvec = np.broadcast_arrays(P, kvec)
    shape = P.shape[:-1]
    n1, n2, nj = _twice(j1) + 1, _twice(j2) + 1, _twice(j) + 1
    if (
        _twice(s) > _twice(j1) + _twice(j2) or _twice(s) < abs(_twice(j1) - _twice(j2))
        or (_twice(j1) + _twice(j2) + _twice(s)) % 2
        or _twice(j) > 2 * l + _twice(s) or _twice(j) < abs(2 * l - _twice(s))
        or (2 * l + _twice(s) + _twice(j)) % 2
    ):
        return np.zeros(shape + (n1, n2, nj), dtype=complex)
    k = np.linalg.norm(kvec, axis=-1)
    w1k, w2k = np.sqrt(m1 * m1 + k * k), np.sqrt(m2 * m2 + k * k)
    m0 = w1k + w2k
    E = np.sqrt(m0 * m0 + np.sum(P * P, axis=-1))
    bP = canonical_boost_spinor(m0, P)
    k1 = np.concatenate([w1k[..., None], kvec], axis=-1)
    k2 = np.concatenate([w2k[..., None], -kvec], axis=-1)
    lam = spinor_to_matrix(bP)
    p1 = np.einsum("...mn,...n->...m", lam, k1)
    p2 = np.einsum("...mn,...n->...m", lam, k2)
    jac = np.sqrt(w1k * w2k * E / (p1[..., 0] * p2[..., 0] * m0))
    d1 = wigner_d(j1, wigner_rotation_spinor(bP, k1, SpinKind.CANONICAL))
    d2 = wigner_d(j2, wigner_rotation_spinor(bP, k2, SpinKind.CANONICAL))
    safe = np.where(k[..., None] > 0, kvec / np.where(k > 0, k, 1.0)[..., None], np.array([0.0, 0.0, 1.0]))
    ylm = np.stack([spherical_harmonic(l, ml, safe) for ml in range(l, -l - 1, -1)], axis=-1)
    t = _coupling_tensor(j1, j2, l, s, j)
    inner = np.einsum("...L,xyLm->...xym", ylm, t)
    g = np.einsum("...ax,...by,...xym->...abm", d1, d2, inner)
    return jac[..., None, None, None] * g


def _proj_index(j, mu) -> int:
    mus = spin_projections(j)
    hit = np.nonzero(np.abs(mus - float(mu)) < 1e-12)[0]
    if len(hit) != 1:
        raise ParameterError(f"projection {mu} invalid for spin {j}")
    return int(hit[0])


def poincare_cg(single1: IrrepLabel, single2: IrrepLabel, coupled: CoupledLabel) -> complex:
    """Coefficient density <p1 mu1, p2 mu2 | (m j d) P mu> at the point p1 + p2 = P."""
    for s in (single1, single2):
        if BasisForm(s.form) is not BasisForm.INSTANT:
            raise ParameterError("poincare_cg works in the instant-form canonical basis")
    m1, m2 = single1.m, single2.m
    p1 = on_shell(m1, single1.coords)
    p2 = on_shell(m2, single2.coords)
    P = np.asarray(coupled.p, dtype=float)
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(p1[1:] + p2[1:] - P)) > 1e-10 * scale:
        raise DomainError("total momentum is not conserved at the evaluation point")
    kvec = relative_momentum(p1, p2)
    if abs(free_mass(m1, m2, np.linalg.norm(kvec)) - coupled.m) > 1e-9 * max(1.0, coupled.m):
        return 0j
    l, s, j = coupled.d.l, coupled.d.s, coupled.j
    try:
        i1 = _proj_index(single1.j, single1.mu)
        i2 = _proj_index(single2.j, single2.mu)
        i3 = _proj_index(j, coupled.mu)
    except ParameterError:
        return 0j
    g = poincare_cg_array(single1.j, single2.j, m1, m2, l, s, j, P, kvec)
    return complex(g[i1, i2, i3])


def angular_grid(n_theta: int = 48, n_phi: int = 48) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors and weights: Gauss-Legendre in cos(theta), uniform in phi."""
    x, wx = gauss_legendre(n_theta)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1 - x * x)
    khat = np.stack(
        [st[:, None] * np.cos(phi)[None, :], st[:, None] * np.sin(phi)[None, :], np.broadcast_to(x[:, None], (n_theta, n_phi))],
        axis=-1,
    ).reshape(-1, 3)
    w = (wx[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, :]).reshape(-1)
    return khat, w


def _inverse_jacobian(m1, m2, p1, p2, kmag, P) -> np.ndarray:
    m0 = free_mass(m1, m2, kmag)
    E = np.sqrt(m0 * m0 + np.sum(np.asarray(P) ** 2, axis=-1))
    return p1[..., 0] * p2[..., 0] * m0 / (np.sqrt(m1**2 + kmag**2) * np.sqrt(m2**2 + kmag**2) * E)


def cg_orthonormality_check(
    j1,
    j2,
    grid: QuadratureGrid,
    channels,
    m1: float = 938.92,
    m2: float = 938.92,
    P=(110.0, -70.0, 260.0),
    n_theta: int = 48,
    n_phi: int = 48,
    n_k: int = 6,
) -> float:
    """Max |<c' mu'|c mu> - delta| over coupled labels.

    ``channels`` is a list of (l, s, j). For each of ``n_k`` relative momenta
    taken from ``grid``, single-particle momenta p1 = P/2 + ..., p2 = P - p1 are
    generated over the angular quadrature; the overlap integrates CG* CG with
    the measure d^3p1 d^3p2 restricted by the two delta functions.
    """
    khat, w = angular_grid(n_theta, n_phi)
    P = np.asarray(P, dtype=float)
    ks = grid.nodes[np.linspace(0, len(grid) - 1, n_k).round().astype(int)]
    dev = 0.0
    for k in ks:
        kvec = k * khat
        blocks, labels = [], []
        for l, s, j in channels:
            g = poincare_cg_array(j1, j2, m1, m2, l, s, j, P, kvec)
            blocks.append(g)
            labels.extend([(l, s, j, i) for i in range(g.shape[-1])])
        gall = np.concatenate(blocks, axis=-1)
        # single-particle momenta over the sphere, from the coefficient's own kinematics
        m0 = free_mass(m1, m2, k)
        lam = spinor_to_matrix(canonical_boost_spinor(m0, P))
        p1 = np.einsum("mn,...n->...m", lam, np.concatenate([np.full((len(khat), 1), np.sqrt(m1**2 + k * k)), kvec], axis=-1))
        p2 = np.einsum("mn,...n->...m", lam, np.concatenate([np.full((len(khat), 1), np.sqrt(m2**2 + k * k)), -kvec], axis=-1))
        jinv = _inverse_jacobian(m1, m2, p1, p2, k, P)
        overlap = np.einsum("q,qabc,qabd->cd", w * jinv, gall.conj(), gall)
        dev = max(dev, float(np.max(np.abs(overlap - np.eye(len(labels))))))
    return dev


def intertwining_deviation(
    j1,
    j2,
    m1: float,
    m2: float,
    channel: tuple,
    lam: LorentzTransform,
    P,
    k: float,
    n_theta: int = 48,
    n_phi: int = 48,
) -> float:
    """Max deviation of the two sides of the intertwining relation over the angular quadrature.

    For the transform Lambda acting on a coupled state of total momentum P and
    relative momentum k k_hat, with p_i' = Lambda p_i:

      sum_mu' G(p1',p2'; Lambda P, mu') sqrt(E(LP)/E(P)) D^j[R_wc(Lambda,P)]_{mu' mu}
        = (E(LP)/E(P)) sqrt(w1 w2 / (w1' w2')) sum_nu D^{j1}[R_wc(Lambda,p1)] D^{j2}[R_wc(Lambda,p2)] G(p1,p2; P, mu)

    Translation phases cancel between the two sides. Returns the larger of
    the pointwise max and the quadrature L2 norm, relative to max|G|.
    """
    l, s, j = channel
    khat, w = angular_grid(n_theta, n_phi)
    P = np.asarray(P, dtype=float)
    kvec = k * khat
    m0 = free_mass(m1, m2, k)
    bmat = spinor_to_matrix(canonical_boost_spinor(m0, P))
    p1 = np.einsum("mn,...n->...m", bmat, np.concatenate([np.full((len(khat), 1), np.sqrt(m1**2 + k * k)), kvec], axis=-1))
    p2 = np.einsum("mn,...n->...m", bmat, np.concatenate([np.full((len(khat), 1), np.sqrt(m2**2 + k * k)), -kvec], axis=-1))
    lmat = lam.matrix
    q1, q2 = p1 @ lmat.T, p2 @ lmat.T
    P4 = np.concatenate([[np.sqrt(m0 * m0 + P @ P)], P])
    LP4 = lmat @ P4
    kprime = relative_momentum(q1, q2)
    g = poincare_cg_array(j1, j2, m1, m2, l, s, j, P, kvec)
    gp = poincare_cg_array(j1, j2, m1, m2, l, s, j, LP4[1:], kprime)
    dj = wigner_d(j, wigner_rotation_spinor(lam.spinor, P4, SpinKind.CANONICAL))
    lhs = np.sqrt(LP4[0] / P4[0]) * np.einsum("qabm,mn->qabn", gp, dj)
    d1 = wigner_d(j1, wigner_rotation_spinor(lam.spinor, p1, SpinKind.CANONICAL))
    d2 = wigner_d(j2, wigner_rotation_spinor(lam.spinor, p2, SpinKind.CANONICAL))
    fac = (LP4[0] / P4[0]) * np.sqrt(p1[:, 0] * p2[:, 0] / (q1[:, 0] * q2[:, 0]))
    rhs = fac[:, None, None, None] * np.einsum("qax,qby,qxym->qabm", d1, d2, g)
    diff = np.abs(lhs - rhs)
    scale = max(1e-300, float(np.max(np.abs(g))))
    l2 = np.sqrt(np.einsum("q,qabm->", w, diff**2) / (4 * np.pi))
    return float(max(np.max(diff), l2) / scale)
