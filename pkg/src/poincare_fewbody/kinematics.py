"""Lorentz transforms, canonical and light-front boosts, Wigner rotations.

Conventions
-----------
* Metric signature (-,+,+,+): p.p = -p0^2 + |p|^2, so an on-shell momentum has
  p.p = -m^2.
* Every :class:`LorentzTransform` is carried as an SL(2,C) matrix ``A`` acting
  on ``X = x0 + x.sigma`` by ``X -> A X A^dagger``; the 4x4 matrix is derived
  from it. Wigner rotations are therefore obtained directly in SU(2) with no
  sign ambiguity, and half-integer spin D-matrices are single valued.
* A bare 4x4 matrix is lifted by polar decomposition (canonical boost times a
  rotation) with the rotation lifted to the SU(2) element of non-negative
  trace, i.e. rotation angle in [0, pi].
* D^j is indexed mu = j, j-1, ..., -j and satisfies D^{1/2}(u) = u.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import factorial, sqrt

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DomainError, ParameterError

__all__ = [
    "METRIC",
    "SpinKind",
    "FourVector",
    "SU2Element",
    "LorentzTransform",
    "minkowski_dot",
    "on_shell",
    "boost_canonical",
    "boost_lightfront",
    "boost_of_kind",
    "wigner_rotation",
    "melosh_rotation",
    "wigner_d",
    "spin_projections",
    "canonical_boost_spinor",
    "lightfront_boost_spinor",
    "spinor_to_matrix",
    "wigner_rotation_spinor",
    "random_su2",
    "random_lorentz_spinors",
    "cocycle_deviation",
]

METRIC = np.diag([-1.0, 1.0, 1.0, 1.0])

_SIGMA = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class SpinKind(str, Enum):
    CANONICAL = "canonical"
    LIGHTFRONT = "lightfront"


def minkowski_dot(p, q) -> np.ndarray:
    p = np.asarray(p)
    q = np.asarray(q)
    return -p[..., 0] * q[..., 0] + np.sum(p[..., 1:] * q[..., 1:], axis=-1)


def on_shell(m: float, p) -> np.ndarray:
    """Four-momentum (omega_m(p), p) for three-momenta of shape (..., 3)."""
    p = np.asarray(p, dtype=float)
    w = np.sqrt(m * m + np.sum(p * p, axis=-1))
    return np.concatenate([w[..., None], p], axis=-1)


@dataclass(frozen=True)
class FourVector:
    components: np.ndarray

    def __post_init__(self):
        c = np.array(self.components, dtype=float)
        if c.shape != (4,):
            raise ParameterError("a four-vector has four components")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @classmethod
    def on_shell(cls, m: float, p) -> "FourVector":
        return cls(on_shell(m, p))

    @property
    def energy(self) -> float:
        return float(self.components[0])

    @property
    def momentum(self) -> np.ndarray:
        return self.components[1:]

    @property
    def plus(self) -> float:
        return float(self.components[0] + self.components[3])

    @property
    def mass_squared(self) -> float:
        return float(-minkowski_dot(self.components, self.components))

    @property
    def mass(self) -> float:
        m2 = self.mass_squared
        if m2 <= 0.0 or self.components[0] <= 0.0:
            raise DomainError("four-momentum is not timelike and future pointing")
        return sqrt(m2)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)


def _as4(p) -> np.ndarray:
    if isinstance(p, FourVector):
        return p.components
    return np.asarray(p, dtype=float)


@dataclass(frozen=True)
class SU2Element:
    matrix: np.ndarray

    def __post_init__(self):
        u = np.array(self.matrix, dtype=complex)
        if u.shape != (2, 2):
            raise ParameterError("SU(2) element must be 2x2")
        if np.max(np.abs(u @ u.conj().T - np.eye(2))) > 1e-10 or abs(np.linalg.det(u) - 1.0) > 1e-10:
            raise DomainError("matrix is not in SU(2)")
        u.setflags(write=False)
        object.__setattr__(self, "matrix", u)

    @classmethod
    def identity(cls) -> "SU2Element":
        return cls(np.eye(2))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "SU2Element":
        n = np.asarray(axis, dtype=float)
        n = n / np.linalg.norm(n)
        ns = np.einsum("i,ijk->jk", n, _SIGMA[1:])
        return cls(np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * ns)

    @classmethod
    def from_rotation_matrix(cls, r) -> "SU2Element":
        """Lift of an SO(3) matrix; branch with non-negative trace."""
        x, y, z, w = Rotation.from_matrix(np.asarray(r, dtype=float)).as_quat(canonical=True)
        return cls(w * np.eye(2) - 1j * (x * _SIGMA[1] + y * _SIGMA[2] + z * _SIGMA[3]))

    def rotation_matrix(self) -> np.ndarray:
        u = self.matrix
        return np.real(np.einsum("iab,bc,jcd,da->ij", _SIGMA[1:], u, _SIGMA[1:], u.conj().T)) / 2.0

    def __matmul__(self, other: "SU2Element") -> "SU2Element":
        return SU2Element(self.matrix @ other.matrix)

    def inverse(self) -> "SU2Element":
        return SU2Element(self.matrix.conj().T)


def spinor_to_matrix(a: np.ndarray) -> np.ndarray:
    """4x4 Lorentz matrix of an SL(2,C) element (batched over leading axes)."""
    a = np.asarray(a, dtype=complex)
    ad = np.conj(np.swapaxes(a, -1, -2))
    lam = np.einsum("mab,...bc,ncd,...da->...mn", _SIGMA, a, _SIGMA, ad)
    return 0.5 * lam.real


def canonical_boost_spinor(m, p) -> np.ndarray:
    """(omega + m + p.sigma) / sqrt(2 m (omega + m)), batched over p[..., 3]."""
    p = np.asarray(p, dtype=float)
    m = np.asarray(m, dtype=float)
    w = np.sqrt(m * m + np.sum(p * p, axis=-1))
    ps = np.einsum("...i,ijk->...jk", p.astype(complex), _SIGMA[1:])
    a = (w + m)[..., None, None] * np.eye(2) + ps
    return a / np.sqrt(2.0 * m * (w + m))[..., None, None]


def lightfront_boost_spinor(m, p_plus, p_perp) -> np.ndarray:
    p_plus = np.asarray(p_plus, dtype=float)
    p_perp = np.asarray(p_perp, dtype=float)
    m = np.asarray(m, dtype=float)
    shape = np.broadcast(m, p_plus, p_perp[..., 0]).shape
    a = np.zeros(shape + (2, 2), dtype=complex)
    a[..., 0, 0] = np.sqrt(p_plus / m)
    a[..., 1, 0] = (p_perp[..., 0] + 1j * p_perp[..., 1]) / np.sqrt(m * p_plus)
    a[..., 1, 1] = np.sqrt(m / p_plus)
    return a


def _su2_inverse(a: np.ndarray) -> np.ndarray:
    # inverse of a unimodular 2x2 matrix
    inv = np.empty_like(a)
    inv[..., 0, 0] = a[..., 1, 1]
    inv[..., 1, 1] = a[..., 0, 0]
    inv[..., 0, 1] = -a[..., 0, 1]
    inv[..., 1, 0] = -a[..., 1, 0]
    return inv


@dataclass(frozen=True)
class LorentzTransform:
    """Proper orthochronous Lorentz transformation.

    ``spinor`` is the SL(2,C) representative; ``matrix`` the 4x4 action on
    (p0, p1, p2, p3).
    """

    spinor: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        a = np.array(self.spinor, dtype=complex)
        if a.shape != (2, 2):
            raise ParameterError("spinor representative must be 2x2")
        d = np.linalg.det(a)
        if abs(d - 1.0) > 1e-9:
            raise DomainError(f"spinor representative has det {d}")
        a.setflags(write=False)
        object.__setattr__(self, "spinor", a)

    @property
    def matrix(self) -> np.ndarray:
        return spinor_to_matrix(self.spinor)

    @classmethod
    def identity(cls) -> "LorentzTransform":
        return cls(np.eye(2), "rotation")

    @classmethod
    def rotation(cls, axis, angle: float) -> "LorentzTransform":
        return cls(SU2Element.from_axis_angle(axis, angle).matrix, "rotation")

    @classmethod
    def from_su2(cls, u: SU2Element) -> "LorentzTransform":
        return cls(u.matrix, "rotation")

    @classmethod
    def boost_z(cls, rapidity: float) -> "LorentzTransform":
        return cls(np.diag([np.exp(rapidity / 2), np.exp(-rapidity / 2)]), "canonical_boost")

    @classmethod
    def from_matrix(cls, lam) -> "LorentzTransform":
        """Lift a 4x4 proper orthochronous matrix; rotation part on the trace >= 0 branch."""
        lam = np.asarray(lam, dtype=float)
        if np.max(np.abs(lam.T @ METRIC @ lam - METRIC)) > 1e-9 or lam[0, 0] < 1.0 or np.linalg.det(lam) < 0:
            raise DomainError("matrix is not a proper orthochronous Lorentz transformation")
        u = lam[1:, 0]
        b = canonical_boost_spinor(1.0, u)
        rot = spinor_to_matrix(_su2_inverse(b)) @ lam
        r = SU2Element.from_rotation_matrix(rot[1:, 1:])
        return cls(b @ r.matrix, "general")

    def __matmul__(self, other: "LorentzTransform") -> "LorentzTransform":
        kind = self.kind if self.kind == other.kind else "general"
        return LorentzTransform(self.spinor @ other.spinor, kind)

    def inverse(self) -> "LorentzTransform":
        return LorentzTransform(_su2_inverse(self.spinor), self.kind)

    def apply(self, p) -> np.ndarray:
        return _as4(p) @ self.matrix.T


def boost_canonical(m: float, p) -> LorentzTransform:
    """Rotationless boost taking (m, 0, 0, 0) to (omega_m(p), p)."""
    if not m > 0:
        raise ParameterError(f"mass must be positive, got {m}")
    return LorentzTransform(canonical_boost_spinor(m, np.asarray(p, dtype=float)), "canonical_boost")


def boost_lightfront(m: float, p_plus: float, p_perp) -> LorentzTransform:
    """Light-front preserving boost taking (m, 0, 0, 0) to the momentum with p+ and p_perp."""
    if not m > 0:
        raise ParameterError(f"mass must be positive, got {m}")
    if not p_plus > 0:
        raise ParameterError(f"p+ must be positive, got {p_plus}")
    return LorentzTransform(lightfront_boost_spinor(m, p_plus, np.asarray(p_perp, dtype=float)), "lightfront_boost")


def _mass_of(p: np.ndarray) -> np.ndarray:
    m2 = -minkowski_dot(p, p)
    if np.any(m2 <= 0.0) or np.any(p[..., 0] <= 0.0):
        raise DomainError("momentum must be timelike and future pointing")
    return np.sqrt(m2)


def boost_spinor_of_kind(p: np.ndarray, kind: SpinKind | str) -> np.ndarray:
    """Batched boost spinor B(p) of the given kind, mass taken from p."""
    p = np.asarray(p, dtype=float)
    m = _mass_of(p)
    if SpinKind(kind) is SpinKind.CANONICAL:
        return canonical_boost_spinor(m, p[..., 1:])
    return lightfront_boost_spinor(m, p[..., 0] + p[..., 3], p[..., 1:3])


def boost_of_kind(p, kind: SpinKind | str) -> LorentzTransform:
    p = _as4(p)
    label = "canonical_boost" if SpinKind(kind) is SpinKind.CANONICAL else "lightfront_boost"
    return LorentzTransform(boost_spinor_of_kind(p, kind), label)


def wigner_rotation_spinor(lam_spinor: np.ndarray, p: np.ndarray, kind: SpinKind | str) -> np.ndarray:
    """Batched B^{-1}(Lambda p) Lambda B(p); ``lam_spinor`` broadcasts against p."""
    p = np.asarray(p, dtype=float)
    lam_spinor = np.asarray(lam_spinor, dtype=complex)
    lp = np.einsum("...mn,...n->...m", spinor_to_matrix(lam_spinor), p)
    b = boost_spinor_of_kind(p, kind)
    bl = boost_spinor_of_kind(lp, kind)
    w = _su2_inverse(bl) @ lam_spinor @ b
    # the product is unitary up to rounding; re-unitarise through the SU(2) parametrisation
    a_ = 0.5 * (w[..., 0, 0] + np.conj(w[..., 1, 1]))
    b_ = 0.5 * (w[..., 0, 1] - np.conj(w[..., 1, 0]))
    nrm = np.sqrt(np.abs(a_) ** 2 + np.abs(b_) ** 2)
    a_, b_ = a_ / nrm, b_ / nrm
    out = np.empty_like(w)
    out[..., 0, 0] = a_
    out[..., 0, 1] = b_
    out[..., 1, 0] = -np.conj(b_)
    out[..., 1, 1] = np.conj(a_)
    return out


def wigner_rotation(lam: LorentzTransform, p, kind: SpinKind | str = SpinKind.CANONICAL) -> SU2Element:
    """Wigner rotation B^{-1}(Lambda p) Lambda B(p) for boosts of the given kind."""
    return SU2Element(wigner_rotation_spinor(lam.spinor, _as4(p), kind))


def melosh_rotation(m: float, p) -> SU2Element:
    """B_c^{-1}(p) B_f(p) for a particle of mass m and three-momentum p."""
    if not m > 0:
        raise ParameterError(f"mass must be positive, got {m}")
    p4 = on_shell(m, p)
    bc = canonical_boost_spinor(m, p4[1:])
    bf = lightfront_boost_spinor(m, p4[0] + p4[3], p4[1:3])
    return SU2Element(_su2_inverse(bc) @ bf)


def _twice(j) -> int:
    tj = 2 * float(j)
    if tj < 0 or abs(tj - round(tj)) > 1e-12:
        raise ParameterError(f"spin must be a non-negative multiple of 1/2, got {j!r}")
    return int(round(tj))


def spin_projections(j) -> np.ndarray:
    """mu = j, j-1, ..., -j."""
    tj = _twice(j)
    return (tj - 2 * np.arange(tj + 1)) / 2.0


def _d_table(tj: int):
    """Index lists and coefficients of the polynomial form of D^j."""
    terms = []
    for r, tm in enumerate(range(tj, -tj - 1, -2)):
        for c, tmp in enumerate(range(tj, -tj - 1, -2)):
            jpm, jmm = (tj + tm) // 2, (tj - tm) // 2
            jpmp, jmmp = (tj + tmp) // 2, (tj - tmp) // 2
            pref = sqrt(factorial(jpm) * factorial(jmm) * factorial(jpmp) * factorial(jmmp))
            mm = (tm + tmp) // 2
            for i in range(max(0, mm), min(jpm, jpmp) + 1):
                coef = pref / (factorial(i) * factorial(jpmp - i) * factorial(jpm - i) * factorial(i - mm))
                # powers of a, b, c, d
                terms.append((r, c, coef, i, jpm - i, jpmp - i, i - mm))
    return terms


_D_CACHE: dict[int, list] = {}


def wigner_d(j, u) -> np.ndarray:
    """SU(2) representation matrix D^j(u), rows/cols ordered mu = j..-j.

    Evaluated as the homogeneous polynomial of degree 2j in the entries of u,
    which makes D^j an exact homomorphism. ``u`` may be an :class:`SU2Element`
    or an array of 2x2 matrices (batched over leading axes).
    """
    tj = _twice(j)
    m = u.matrix if isinstance(u, SU2Element) else np.asarray(u, dtype=complex)
    if m.shape[-2:] != (2, 2):
        raise ParameterError("expected 2x2 matrices")
    terms = _D_CACHE.get(tj)
    if terms is None:
        terms = _D_CACHE.setdefault(tj, _d_table(tj))
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    out = np.zeros(m.shape[:-2] + (tj + 1, tj + 1), dtype=complex)
    for r, col, coef, pa, pb, pc, pd in terms:
        out[..., r, col] += coef * a**pa * b**pb * c**pc * d**pd
    return out


def random_su2(rng: np.random.Generator, n: int) -> np.ndarray:
    """n Haar-random SU(2) matrices from uniform unit quaternions."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    out = np.empty((n, 2, 2), dtype=complex)
    out[:, 0, 0] = w - 1j * z
    out[:, 0, 1] = -1j * x - y
    out[:, 1, 0] = -1j * x + y
    out[:, 1, 1] = w + 1j * z
    return out


def random_lorentz_spinors(rng: np.random.Generator, n: int, max_rapidity: float = 1.5) -> np.ndarray:
    """n SL(2,C) elements: boost of rapidity in [0, max_rapidity] times a random rotation."""
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    eta = rng.uniform(0.0, max_rapidity, size=(n, 1))
    return canonical_boost_spinor(1.0, np.sinh(eta) * d) @ random_su2(rng, n)


def cocycle_deviation(kind: SpinKind | str, n: int, rng: np.random.Generator, max_rapidity: float = 1.5) -> float:
    """max |R_w(L2 L1, p) - R_w(L2, L1 p) R_w(L1, p)| over n random triples."""
    l1 = random_lorentz_spinors(rng, n, max_rapidity)
    l2 = random_lorentz_spinors(rng, n, max_rapidity)
    m = rng.uniform(0.5, 2.0, size=n)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    p3 = d * (2.0 * m * rng.uniform(0.0, 1.0, size=n))[:, None]
    p = on_shell(m, p3)
    lhs = wigner_rotation_spinor(l2 @ l1, p, kind)
    p1 = np.einsum("...mn,...n->...m", spinor_to_matrix(l1), p)
    rhs = wigner_rotation_spinor(l2, p1, kind) @ wigner_rotation_spinor(l1, p, kind)
    return float(np.max(np.abs(lhs - rhs)))
