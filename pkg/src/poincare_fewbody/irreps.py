"""Single-particle irreducible bases in instant, point and front form.

A Poincare-group Wigner function is a delta function times a factor, so it is
represented exactly by the image of the source point, a complex weight
(square-root Jacobian times the translation phase) and the spin matrix.

Coordinates per form:
    instant  three-momentum p
    point    spatial four-velocity v  (v0 = sqrt(1 + v^2))
    front    (p+, p_x, p_y) with p+ = p0 + p3

The point-form kinematic set is taken to be the Lorentz group with a = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, ParameterError
from .kinematics import (
    LorentzTransform,
    SpinKind,
    canonical_boost_spinor,
    lightfront_boost_spinor,
    minkowski_dot,
    spin_projections,
    spinor_to_matrix,
    wigner_d,
    wigner_rotation_spinor,
    _su2_inverse,
)

__all__ = [
    "BasisForm",
    "IrrepLabel",
    "PoincareElement",
    "WignerFunctionValue",
    "four_momentum",
    "coordinates",
    "wigner_function",
    "basis_change",
    "basis_change_matrix",
    "kinematic_subgroup_check",
    "in_kinematic_subgroup",
    "sample_coordinates",
    "sample_kinematic_element",
    "sample_dynamic_element",
]


class BasisForm(str, Enum):
    INSTANT = "instant"
    POINT = "point"
    FRONT = "front"


_SPIN_KIND = {
    BasisForm.INSTANT: SpinKind.CANONICAL,
    BasisForm.POINT: SpinKind.CANONICAL,
    BasisForm.FRONT: SpinKind.LIGHTFRONT,
}


@dataclass(frozen=True)
class IrrepLabel:
    form: BasisForm
    m: float
    j: float
    coords: tuple[float, float, float]
    mu: float

    def __post_init__(self):
        if not self.m > 0:
            raise ParameterError("mass must be positive")
        if abs(self.mu) > self.j + 1e-12 or abs((self.j - self.mu) - round(self.j - self.mu)) > 1e-12:
            raise ParameterError(f"projection {self.mu} invalid for spin {self.j}")
        if BasisForm(self.form) is BasisForm.FRONT and not self.coords[0] > 0:
            raise DomainError("front-form coordinates need p+ > 0")


@dataclass(frozen=True)
class PoincareElement:
    lam: LorentzTransform
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @classmethod
    def identity(cls) -> "PoincareElement":
        return cls(LorentzTransform.identity(), np.zeros(4))

    def __matmul__(self, other: "PoincareElement") -> "PoincareElement":
        # (L2, a2)(L1, a1) = (L2 L1, a2 + L2 a1)
        return PoincareElement(self.lam @ other.lam, self.a + self.lam.apply(other.a))


@dataclass(frozen=True)
class WignerFunctionValue:
    target_coords: np.ndarray
    weight: complex
    spin_matrix: np.ndarray


def four_momentum(form: BasisForm | str, m: float, coords) -> np.ndarray:
    c = np.asarray(coords, dtype=float)
    form = BasisForm(form)
    if form is BasisForm.INSTANT:
        return np.concatenate([[np.sqrt(m * m + c @ c)], c])
    if form is BasisForm.POINT:
        return m * np.concatenate([[np.sqrt(1.0 + c @ c)], c])
    p_plus, px, py = c
    if not p_plus > 0:
        raise DomainError("front-form coordinates need p+ > 0")
    p_minus = (m * m + px * px + py * py) / p_plus
    return np.array([0.5 * (p_plus + p_minus), px, py, 0.5 * (p_plus - p_minus)])


def coordinates(form: BasisForm | str, m: float, p4) -> np.ndarray:
    p4 = np.asarray(p4, dtype=float)
    form = BasisForm(form)
    if form is BasisForm.INSTANT:
        return p4[1:].copy()
    if form is BasisForm.POINT:
        return p4[1:] / m
    return np.array([p4[0] + p4[3], p4[1], p4[2]])


def _jacobian_variable(form: BasisForm, p4: np.ndarray, m: float) -> float:
    if form is BasisForm.INSTANT:
        return p4[0]
    if form is BasisForm.POINT:
        return p4[0] / m
    return p4[0] + p4[3]


def wigner_function(
    form: BasisForm | str,
    m: float,
    j,
    lam: LorentzTransform,
    a,
    source,
) -> WignerFunctionValue:
    """Matrix element <target, mu | U(Lambda, a) | source, mu'> stripped of its delta function.

    weight = sqrt(J(target)/J(source)) exp(i (Lambda p).a) with J = p0 (instant),
    v0 (point) or p+ (front); spin_matrix = D^j of the form's Wigner rotation.
    """
    form = BasisForm(form)
    if not m > 0:
        raise ParameterError("mass must be positive")
    p = four_momentum(form, m, source)
    lp = lam.apply(p)
    a = np.asarray(a, dtype=float)
    if a.shape != (4,):
        raise ParameterError("translation must be a four-vector")
    weight = np.sqrt(_jacobian_variable(form, lp, m) / _jacobian_variable(form, p, m)) * np.exp(
        1j * minkowski_dot(lp, a)
    )
    rot = wigner_rotation_spinor(lam.spinor, p, _SPIN_KIND[form])
    return WignerFunctionValue(coordinates(form, m, lp), complex(weight), wigner_d(j, rot))


def _melosh_spinor(m: float, p3) -> np.ndarray:
    p3 = np.asarray(p3, dtype=float)
    w = np.sqrt(m * m + p3 @ p3)
    bc = canonical_boost_spinor(m, p3)
    bf = lightfront_boost_spinor(m, w + p3[2], p3[:2])
    return _su2_inverse(bc) @ bf


def basis_change_matrix(from_form, to_form, m: float, j, source) -> tuple[np.ndarray, np.ndarray]:
    """Target coordinates and the matrix C with |from, mu> = sum_mu' |to, mu'> C[mu', mu]."""
    f, t = BasisForm(from_form), BasisForm(to_form)
    if f is t:
        raise ParameterError("basis change needs two different forms")
    n = int(round(2 * float(j))) + 1
    p4 = four_momentum(f, m, source)
    p3 = p4[1:]
    # to the instant basis
    if f is BasisForm.INSTANT:
        c_in = np.eye(n, dtype=complex)
    elif f is BasisForm.POINT:
        c_in = m**1.5 * np.eye(n, dtype=complex)
    else:
        c_in = np.sqrt(p4[0] / (p4[0] + p4[3])) * wigner_d(j, _melosh_spinor(m, p3))
    # from the instant basis to the target
    if t is BasisForm.INSTANT:
        c_out = np.eye(n, dtype=complex)
    elif t is BasisForm.POINT:
        c_out = m**-1.5 * np.eye(n, dtype=complex)
    else:
        c_out = np.sqrt((p4[0] + p4[3]) / p4[0]) * wigner_d(j, _su2_inverse(_melosh_spinor(m, p3)))
    return coordinates(t, m, p4), c_out @ c_in


def basis_change(from_form, to_form, m: float, j, source, mu) -> tuple[np.ndarray, np.ndarray]:
    """Expansion of |from; source, mu> in the ``to`` basis: (target coords, coefficients over mu')."""
    mus = spin_projections(j)
    hit = np.nonzero(np.abs(mus - float(mu)) < 1e-12)[0]
    if len(hit) != 1:
        raise ParameterError(f"projection {mu} invalid for spin {j}")
    coords, c = basis_change_matrix(from_form, to_form, m, j, source)
    return coords, c[:, hit[0]]


def in_kinematic_subgroup(form: BasisForm | str, g: PoincareElement, tol: float = 1e-12) -> bool:
    """Structural membership test for the form's kinematic subgroup."""
    form = BasisForm(form)
    a = g.a
    if form is BasisForm.INSTANT:
        lam = g.lam.matrix
        return abs(lam[0, 0] - 1.0) < tol and np.max(np.abs(lam[0, 1:])) < tol and abs(a[0]) < tol
    if form is BasisForm.POINT:
        return bool(np.max(np.abs(a)) < tol)
    return abs(g.lam.spinor[0, 1]) < tol and abs(a[0] + a[3]) < tol


def _same(v1: WignerFunctionValue, v2: WignerFunctionValue, tol: float) -> bool:
    c1, c2 = v1.target_coords, v2.target_coords
    scale = max(1.0, float(np.max(np.abs(c1))))
    return (
        float(np.max(np.abs(c1 - c2))) <= tol * scale
        and abs(v1.weight - v2.weight) <= tol
        and float(np.max(np.abs(v1.spin_matrix - v2.spin_matrix))) <= tol
    )


def kinematic_subgroup_check(
    form: BasisForm | str,
    lam: LorentzTransform,
    a,
    masses: tuple[float, float],
    samples,
    j=0.5,
    tol: float = 1e-10,
) -> bool:
    """True iff the Wigner function is the same for both masses at every sample point."""
    m1, m2 = masses
    if not (m1 > 0 and m2 > 0) or m1 == m2:
        raise ParameterError("need two distinct positive masses")
    for s in samples:
        if not _same(wigner_function(form, m1, j, lam, a, s), wigner_function(form, m2, j, lam, a, s), tol):
            return False
    return True


def sample_coordinates(form: BasisForm | str, m: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded momenta with |p| <= 3m expressed in the form's coordinates."""
    form = BasisForm(form)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    p = d * (3.0 * m * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1 / 3))
    return np.array([coordinates(form, m, np.concatenate([[np.sqrt(m * m + q @ q)], q])) for q in p])


def _random_rotation(rng) -> LorentzTransform:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    u = np.array([[w - 1j * z, -1j * x - y], [-1j * x + y, w + 1j * z]])
    return LorentzTransform(u, "rotation")


def _random_lorentz(rng, max_rapidity: float = 1.5) -> LorentzTransform:
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    eta = rng.uniform(0.3, max_rapidity)
    b = LorentzTransform(canonical_boost_spinor(1.0, np.sinh(eta) * d), "canonical_boost")
    return b @ _random_rotation(rng)


def sample_kinematic_element(form: BasisForm | str, rng: np.random.Generator) -> PoincareElement:
    form = BasisForm(form)
    if form is BasisForm.INSTANT:
        return PoincareElement(_random_rotation(rng), np.concatenate([[0.0], rng.normal(size=3)]))
    if form is BasisForm.POINT:
        return PoincareElement(_random_lorentz(rng), np.zeros(4))
    # light-front preserving: lower-triangular SL(2,C), translations with a+ = 0
    alpha = np.exp(rng.uniform(-0.8, 0.8) + 1j * rng.uniform(0, 2 * np.pi))
    c = complex(*rng.normal(size=2))
    spinor = np.array([[alpha, 0.0], [c, 1.0 / alpha]])
    a_minus = rng.normal()
    a = np.array([0.5 * a_minus, *rng.normal(size=2), -0.5 * a_minus])
    return PoincareElement(LorentzTransform(spinor, "lightfront_boost"), a)


def sample_dynamic_element(form: BasisForm | str, rng: np.random.Generator) -> PoincareElement:
    """Random element outside the form's kinematic subgroup."""
    form = BasisForm(form)
    if form is BasisForm.INSTANT:
        a = np.concatenate([[rng.choice([-1, 1]) * rng.uniform(0.5, 2.0)], rng.normal(size=3)])
        return PoincareElement(_random_lorentz(rng), a)
    if form is BasisForm.POINT:
        a = rng.normal(size=4)
        a *= rng.uniform(0.5, 2.0) / np.linalg.norm(a)
        return PoincareElement(_random_lorentz(rng), a)
    g = _random_lorentz(rng)
    spinor = g.spinor
    if abs(spinor[0, 1]) < 0.1:
        spinor = spinor @ _random_rotation(rng).spinor
        if abs(spinor[0, 1]) < 0.1:
            spinor = spinor @ LorentzTransform.rotation([1.0, 0.0, 0.0], 1.0).spinor
    a = rng.normal(size=4)
    return PoincareElement(LorentzTransform(spinor, "general"), a)
