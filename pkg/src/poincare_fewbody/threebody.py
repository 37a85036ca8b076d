"""Three identical spinless bosons: embedded pair interactions and the Faddeev bound state.

States of the (12)(3) partition are |k, q> with k the pair relative momentum
and q the spectator momentum in the three-body rest frame, s-wave in both,
normalised to delta(k'-k)/k^2 delta(q'-q)/q^2. Vectors on the product grid
are stored row-major with shape (n_k, n_q).

The Bakamjian-Thomas pair operator is a function of Q = k^2 + 2 mu v:
    M_(12)(3) = g_q(Q),  g_q(x) = sqrt(F(x)^2 + q^2) + sqrt(m3^2 + q^2),
    F(x) = sqrt(x + m1^2) + sqrt(x + m2^2),
so its embedded t-matrix is obtained from the same k-space machinery as the
two-body problem. The nonrelativistic path uses t_nr and the Galilean
recoupling; masses are reported as 3m + E so both paths share one search.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .clebsch import relative_momentum
from .errors import NumericalError, ParameterError
from .numerics import (
    QuadratureGrid,
    gauss_legendre,
    global_interpolation_matrix,
    interpolation_matrix,
    largest_eigenvalue,
    make_grid,
)
from .twobody import (
    PartialWaveKernel,
    complex_step_derivative,
    lippmann_schwinger_halfshell,
    nr_hamiltonian,
    off_node_kernel,
    on_shell_s_matrix,
    operator_function_kernel,
    reduced_mass,
    solve_nr_bound_states,
    sqrt_function_kernel,
    coester_embed,
    solve_bound_states,
)

__all__ = [
    "JacobiGrid",
    "make_jacobi_grid",
    "EmbeddingKind",
    "EmbeddedMassOperator",
    "embed_tensor",
    "embed_bt",
    "reduced_s_elements",
    "onshell_equivalence_check",
    "permutation_geometry",
    "permutation_coefficient",
    "recoupling_jacobian_check",
    "halfshell_kernel",
    "halfshell_t_nr",
    "halfshell_t_embedded",
    "offshell_extend",
    "FaddeevSetup",
    "prepare_faddeev",
    "FaddeevKernel",
    "assemble_faddeev_kernel",
    "faddeev_mass_operator",
    "oracle_mass",
    "TrimerSolution",
    "solve_trimer",
    "solve_trimer_nonrel",
    "permutation_matrix",
    "symmetrization_residual",
    "total_wavefunction",
    "embedded_t",
    "dominant_eta",
]


# --------------------------------------------------------------------- grids


@dataclass(frozen=True)
class JacobiGrid:
    """Pair-momentum and spectator-momentum grids plus the angle rule for recoupling.

    Both momentum grids are mapped onto [0, inf); there is no momentum cutoff.
    """

    k_grid: QuadratureGrid
    q_grid: QuadratureGrid
    n_x: int = 16

    @property
    def x(self) -> tuple[np.ndarray, np.ndarray]:
        return gauss_legendre(self.n_x)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.k_grid), len(self.q_grid)

    @property
    def size(self) -> int:
        return len(self.k_grid) * len(self.q_grid)

    def describe(self) -> dict:
        return {"k": self.k_grid.describe(), "q": self.q_grid.describe(), "n_x": self.n_x}


def make_jacobi_grid(
    n_k: int = 32,
    n_q: int = 24,
    n_x: int = 16,
    k_scale: float = 400.0,
    q_scale: float = 300.0,
    mapping: str = "rational",
) -> JacobiGrid:
    if n_x < 2:
        raise ParameterError("angle rule needs at least two points")
    return JacobiGrid(make_grid(n_k, k_scale, mapping), make_grid(n_q, q_scale, mapping), int(n_x))


# ---------------------------------------------------------------- embeddings


class EmbeddingKind(str, Enum):
    TENSOR_PRODUCT = "tensor_product"
    BAKAMJIAN_THOMAS = "bakamjian_thomas"


def _pair_mass_function(m1: float, m2: float):
    def F(x):
        return np.sqrt(x + m1 * m1) + np.sqrt(x + m2 * m2)

    return F


@dataclass(frozen=True)
class EmbeddedMassOperator:
    """A 2+1 mass operator built from the pair kernel ``v``.

    For the Bakamjian-Thomas kind the spectator momentum q labels diagonal
    blocks. For the tensor-product kind the pair and spectator momenta p12, p3
    are the kinematic labels and

        M = sqrt((sqrt(F(Q)^2 + p12^2) + sqrt(m3^2 + p3^2))^2 - (p12 + p3)^2),

    which coincides with the Bakamjian-Thomas block in the rest frame p12 = -p3.
    """

    kind: EmbeddingKind
    v: PartialWaveKernel
    m1: float
    m2: float
    m3: float
    pair_momentum: tuple = (0.0, 0.0, 0.0)
    spectator_momentum: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", EmbeddingKind(self.kind))
        if not (self.m1 > 0 and self.m2 > 0 and self.m3 > 0):
            raise ParameterError("masses must be positive")

    @property
    def mu(self) -> float:
        return reduced_mass(self.m1, self.m2)

    def mass_function(self, q: float | None = None):
        """The scalar function f with M = f(Q) on the block selected by q (or the stored frame)."""
        F = _pair_mass_function(self.m1, self.m2)
        m3 = self.m3
        if self.kind is EmbeddingKind.BAKAMJIAN_THOMAS or q is not None:
            if q is None:
                raise ParameterError("the Bakamjian-Thomas block needs a spectator momentum q")
            e3 = np.sqrt(m3 * m3 + q * q)

            def g(x):
                return np.sqrt(F(x) ** 2 + q * q) + e3

            return g
        p12 = np.asarray(self.pair_momentum, dtype=float)
        p3 = np.asarray(self.spectator_momentum, dtype=float)
        a2, e3 = p12 @ p12, np.sqrt(m3 * m3 + p3 @ p3)
        ptot2 = (p12 + p3) @ (p12 + p3)

        def h(x):
            return np.sqrt((np.sqrt(F(x) ** 2 + a2) + e3) ** 2 - ptot2)

        return h

    def block(self, q: float | None = None) -> np.ndarray:
        """Weighted-form matrix of f(Q) on the pair grid, by spectral calculus."""
        f = self.mass_function(q)
        qmat = 2 * self.mu * nr_hamiltonian(self.v, self.m1, self.m2)
        vals, vecs = np.linalg.eigh(qmat)
        out = (vecs * f(vals)) @ vecs.T
        return 0.5 * (out + out.T)

    def free_block(self, q: float | None = None) -> np.ndarray:
        k = self.v.grid.nodes
        return self.mass_function(q)(k * k)

    def matrix(self, q_grid: QuadratureGrid) -> np.ndarray:
        """Block-diagonal operator on the (k, q) product grid, rows ordered (k, q) row-major."""
        n_k, n_q = len(self.v.grid), len(q_grid)
        out = np.zeros((n_k, n_q, n_k, n_q))
        for a, q in enumerate(q_grid.nodes):
            out[:, a, :, a] = self.block(q)
        return out.reshape(n_k * n_q, n_k * n_q)

    def spectrum(self, q: float | None = None) -> np.ndarray:
        return np.linalg.eigvalsh(self.block(q))

    def contour_abscissa(self) -> float:
        qmat = 2 * self.mu * nr_hamiltonian(self.v, self.m1, self.m2)
        qmin = min(float(np.linalg.eigvalsh(qmat)[0]), 0.0)
        return 0.5 * (qmin - min(self.m1, self.m2) ** 2)

    def interaction_kernel(self, rows, cols, q: float | None = None, n_s: int = 64) -> np.ndarray:
        """Kernel <k'|f(Q) - f(K^2)|k> between arbitrary momenta (measure k^2 dk)."""
        if (self.kind is EmbeddingKind.BAKAMJIAN_THOMAS or q is not None) and self.m1 == self.m2:
            # F^2 + q^2 = 4(x + m^2 + q^2/4): a single square root
            m = self.m1
            return sqrt_function_kernel(self.v, self.mu, [(2.0, m * m + 0.25 * q * q)], rows, cols, n_s)
        return operator_function_kernel(self.v, self.mu, self.mass_function(q), rows, cols, self.contour_abscissa())


def embed_tensor(
    v: PartialWaveKernel,
    m3: float,
    m1: float | None = None,
    m2: float | None = None,
    pair_momentum=(0.0, 0.0, 0.0),
    spectator_momentum=(0.0, 0.0, 0.0),
) -> EmbeddedMassOperator:
    m1 = m3 if m1 is None else m1
    m2 = m1 if m2 is None else m2
    return EmbeddedMassOperator(
        EmbeddingKind.TENSOR_PRODUCT, v, m1, m2, m3, tuple(map(float, pair_momentum)), tuple(map(float, spectator_momentum))
    )


def embed_bt(v: PartialWaveKernel, m3: float, m1: float | None = None, m2: float | None = None) -> EmbeddedMassOperator:
    m1 = m3 if m1 is None else m1
    m2 = m1 if m2 is None else m2
    return EmbeddedMassOperator(EmbeddingKind.BAKAMJIAN_THOMAS, v, m1, m2, m3)


def _energy_functions(f):
    def eps(p):
        return f(np.asarray(p, dtype=float) ** 2)

    def deps(p):
        p = np.asarray(p, dtype=float)
        return 2 * p * complex_step_derivative(f, p * p)

    return eps, deps


def reduced_s_elements(op: EmbeddedMassOperator, k_on, q: float | None = None) -> np.ndarray:
    """On-shell reduced S = 1 - 2 pi i rho T for the pair at relative momenta ``k_on``."""
    out = []
    for k0 in np.atleast_1d(np.asarray(k_on, dtype=float)):
        o = dataclasses.replace(op, v=off_node_kernel(op.v, k0))
        eps, deps = _energy_functions(o.mass_function(q))
        pts = np.append(o.v.grid.nodes, k0)
        ker = o.interaction_kernel(pts, pts, q)
        ker = 0.5 * (ker + ker.T)
        out.append(on_shell_s_matrix(ker, o.v.grid, k0, eps, deps))
    return np.array(out)


def _k_from_energy(m1: float, m2: float, e) -> np.ndarray:
    """Relative momentum of a pair with c.m. kinetic energy e = M12 - m1 - m2."""
    mm = m1 + m2 + np.asarray(e, dtype=float)
    return np.sqrt((mm**2 - (m1 + m2) ** 2) * (mm**2 - (m1 - m2) ** 2)) / (2 * mm)


def onshell_equivalence_check(
    v: PartialWaveKernel,
    m3: float,
    energies,
    m1: float | None = None,
    m2: float | None = None,
    pair_momentum=(60.0, -40.0, 250.0),
    spectator_momentum=(120.0, 30.0, -90.0),
    q: float = 150.0,
) -> float:
    """max |S_tensor - S_BT| over pair c.m. energies (MeV above the pair threshold).

    The tensor-product element is evaluated in a moving frame (p12, p3 as given,
    not back to back) and the Bakamjian-Thomas one at spectator momentum q.
    """
    t_op = embed_tensor(v, m3, m1, m2, pair_momentum, spectator_momentum)
    b_op = embed_bt(v, m3, m1, m2)
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    if np.any(e <= 0):
        raise ParameterError("energies must lie above the pair threshold")
    k_on = _k_from_energy(t_op.m1, t_op.m2, e)
    s_t = reduced_s_elements(t_op, k_on)
    s_b = reduced_s_elements(b_op, k_on, q)
    return float(np.max(np.abs(s_t - s_b)))


# ---------------------------------------------------------------- recoupling


def _omega(m, p):
    return np.sqrt(m * m + p * p)


def permutation_geometry(q, q_prime, x, m: float, relativistic: bool = True):
    """(pi1, pi2, R) for the recoupling <k q|(23)(1): k' q'> of equal-mass bosons.

    In the three-body rest frame p3 = q, p1 = q', p2 = -q - q' with
    cos(q, q') = x. pi1 is the (12) relative momentum and pi2 the (23) one.
    Relativistically they come from canonical boosts (clebsch.relative_momentum)
    and R = (J_a J_c)^(-1/2) with
        J_a = w(p1) w(p2) M(pi1) / (w(pi1)^2 sqrt(M(pi1)^2 + q^2)),  M = 2 w,
    the Jacobian of (p1, p2, p3) -> (k, q, P) at P = 0 (J_c likewise). The
    nonrelativistic values are |q' + q/2|, |q + q'/2| and R = 1.
    """
    q, qp, x = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (q, q_prime, x)))
    if not relativistic:
        pi1 = np.sqrt(np.maximum(qp * qp + 0.25 * q * q + q * qp * x, 0.0))
        pi2 = np.sqrt(np.maximum(q * q + 0.25 * qp * qp + q * qp * x, 0.0))
        return pi1, pi2, np.ones_like(pi1)
    st = np.sqrt(np.maximum(1 - x * x, 0.0))
    zero = np.zeros_like(q)
    p3 = np.stack([zero, zero, q], axis=-1)
    p1 = np.stack([qp * st, zero, qp * x], axis=-1)
    p2 = -p1 - p3

    def four(p):
        return np.concatenate([_omega(m, np.linalg.norm(p, axis=-1))[..., None], p], axis=-1)

    f1, f2, f3 = four(p1), four(p2), four(p3)
    pi1 = np.linalg.norm(relative_momentum(f1, f2), axis=-1)
    pi2 = np.linalg.norm(relative_momentum(f2, f3), axis=-1)
    m12, m23 = 2 * _omega(m, pi1), 2 * _omega(m, pi2)
    ja = f1[..., 0] * f2[..., 0] * m12 / (_omega(m, pi1) ** 2 * np.sqrt(m12**2 + q * q))
    jc = f2[..., 0] * f3[..., 0] * m23 / (_omega(m, pi2) ** 2 * np.sqrt(m23**2 + qp * qp))
    return pi1, pi2, 1.0 / np.sqrt(ja * jc)


def permutation_coefficient(q, q_prime, x, m: float, relativistic: bool = True):
    """Recoupling weight R(q, q', x) multiplying delta(k - pi1) delta(k' - pi2)/(k^2 k'^2)."""
    return permutation_geometry(q, q_prime, x, m, relativistic)[2]


def _jacobi_vectors(p1, p2, p3, m, relativistic):
    """(k, q) of the (12)(3) partition from rest-frame momenta."""
    if not relativistic:
        return 0.5 * (p1 - p2), p3
    f = [np.concatenate([[_omega(m, np.linalg.norm(p))], p]) for p in (p1, p2, p3)]
    return relative_momentum(f[0], f[1]), p3


def recoupling_jacobian_check(q_vec, qp_vec, m: float, relativistic: bool = True, h: float = 1e-3) -> float:
    """|det d(k_a, q_a)/d(k_c, q_c)| / (J_c/J_a) - 1 at one configuration.

    The recoupling is unitary exactly when the ratio of the partition Jacobians
    equals the Jacobian of the change of Jacobi variables; the determinant is
    taken by central differences (step h MeV) through the exact momentum maps.
    """
    q_vec = np.asarray(q_vec, dtype=float)
    qp_vec = np.asarray(qp_vec, dtype=float)

    def a_from_c(cvars):
        kc, qc = cvars[:3], cvars[3:]
        # invert the (23)(1) Jacobi map: p1 = qc, pair (23) with total -qc and relative kc
        p1 = qc
        if relativistic:
            m23 = 2 * _omega(m, np.linalg.norm(kc))
            ptot = -qc
            e = np.sqrt(m23**2 + ptot @ ptot)
            k4 = np.concatenate([[_omega(m, np.linalg.norm(kc))], kc])
            # canonical boost of the pair rest frame to total momentum ptot
            g = ptot @ kc
            p2 = kc + ptot * (g / (m23 * (e + m23)) + k4[0] / m23)
        else:
            p2 = kc - 0.5 * qc
        p3 = -p1 - p2
        ka, qa = _jacobi_vectors(p1, p2, p3, m, relativistic)
        return np.concatenate([ka, qa])

    p3, p1 = q_vec, qp_vec
    p2 = -p1 - p3
    if relativistic:
        f = [np.concatenate([[_omega(m, np.linalg.norm(p))], p]) for p in (p1, p2, p3)]
        kc = relative_momentum(f[1], f[2])
    else:
        kc = 0.5 * (p2 - p3)
    c0 = np.concatenate([kc, p1])
    jac = np.empty((6, 6))
    for i in range(6):
        d = np.zeros(6)
        d[i] = h
        jac[:, i] = (a_from_c(c0 + d) - a_from_c(c0 - d)) / (2 * h)
    det = abs(np.linalg.det(jac))
    x = float(q_vec @ qp_vec / (np.linalg.norm(q_vec) * np.linalg.norm(qp_vec)))
    _, _, r = permutation_geometry(np.linalg.norm(q_vec), np.linalg.norm(qp_vec), x, m, relativistic)
    # R^2 = 1/(J_a J_c) and the partition Jacobian ratio J_c/J_a = det
    ja_jc = 1.0 / float(r) ** 2
    ja = _partition_jacobian(p1, p2, p3, m, relativistic)
    jc = ja_jc / ja
    return float(det / (jc / ja) - 1.0)


def _partition_jacobian(p1, p2, p3, m, relativistic):
    if not relativistic:
        return 1.0
    f = [np.concatenate([[_omega(m, np.linalg.norm(p))], p]) for p in (p1, p2, p3)]
    k = np.linalg.norm(relative_momentum(f[0], f[1]))
    m12 = 2 * _omega(m, k)
    q = np.linalg.norm(p3)
    return f[0][0] * f[1][0] * m12 / (_omega(m, k) ** 2 * np.sqrt(m12**2 + q * q))


# ------------------------------------------------------------- t-matrices


def halfshell_kernel(t_nr, k, k_prime, q, m1: float, m2: float | None = None):
    """Embedded half-shell t from the nonrelativistic one:

        [2 mu/(w1 w2 + w1' w2')] [((w1+w2)^2 + (w1'+w2')^2)/(sqrt((w1+w2)^2+q^2) + sqrt((w1'+w2')^2+q^2))] t_nr(k', k)

    with w_i = sqrt(k^2 + m_i^2) and primes at k'. This equals the divided
    difference of g_q between k^2 and k'^2 times 2 mu t_nr. ``t_nr`` is the
    nonrelativistic half-shell value (array or scalar), or a callable (k', k).
    """
    m2 = m1 if m2 is None else m2
    mu = reduced_mass(m1, m2)
    k, kp, q = (np.asarray(a, dtype=float) for a in (k, k_prime, q))
    t = t_nr(kp, k) if callable(t_nr) else np.asarray(t_nr)
    w1, w2 = _omega(m1, k), _omega(m2, k)
    v1, v2 = _omega(m1, kp), _omega(m2, kp)
    s, sp = (w1 + w2) ** 2, (v1 + v2) ** 2
    factor = 2 * mu / (w1 * w2 + v1 * v2) * (s + sp) / (np.sqrt(s + q * q) + np.sqrt(sp + q * q))
    return factor * t


def _halfshell(ker_fn, grid, k0, k_primes, eps, deps, outgoing):
    pts = np.append(grid.nodes, k0)
    aug = ker_fn(pts, pts)
    aug = 0.5 * (aug + aug.T)
    rows = ker_fn(np.atleast_1d(k_primes), pts)
    _, extra, _ = lippmann_schwinger_halfshell(aug, grid, k0, eps, deps, outgoing=outgoing, extra_rows=rows)
    return extra


def halfshell_t_nr(v: PartialWaveKernel, m1: float, m2: float, k0: float, k_primes, outgoing: bool = True) -> np.ndarray:
    """Nonrelativistic half-shell t(k', k0; k0^2/2mu) from the Lippmann-Schwinger equation."""
    mu = reduced_mass(m1, m2)
    v = off_node_kernel(v, k0)

    def eps(p):
        return np.asarray(p) ** 2 / (2 * mu)

    def deps(p):
        return np.asarray(p) / mu

    def ker(a, b):
        return v(np.asarray(a)[:, None], np.asarray(b)[None, :])

    return _halfshell(ker, v.grid, k0, k_primes, eps, deps, outgoing)


def halfshell_t_embedded(op: EmbeddedMassOperator, q: float, k0: float, k_primes, outgoing: bool = True) -> np.ndarray:
    """Half-shell T_c(k', k0; z_c) of the embedded operator at z_c = f(k0^2), solved directly."""
    op = dataclasses.replace(op, v=off_node_kernel(op.v, k0))
    eps, deps = _energy_functions(op.mass_function(q))
    return _halfshell(lambda a, b: op.interaction_kernel(a, b, q), op.v.grid, k0, k_primes, eps, deps, outgoing)


def offshell_extend(t_ref, z_prime: float, z_c: float, m0, measure, t_ref_ext=None):
    """T(z') from T(z_c) through the first resolvent identity.

    T(z') = T(z_c) + T(z') D T(z_c),  D = diag(measure (z_c-z')/((z'-M0)(z_c-M0))),

    which is G0(z') - G0(z_c) for G0 = (z - M0)^-1 and t = v + v G0 t;
    solved on the grid as T(z') = T(z_c)(1 - D T(z_c))^-1; extra columns
    ``t_ref_ext`` (T(z_c) at off-grid momenta) are carried along. ``measure``
    holds the quadrature factors w k^2.
    """
    t_ref = np.asarray(t_ref)
    if z_prime == z_c:
        return (t_ref.copy(), None if t_ref_ext is None else np.array(t_ref_ext))
    m0 = np.asarray(m0, dtype=float)
    d = np.asarray(measure) * (z_c - z_prime) / ((z_prime - m0) * (z_c - m0))
    a = np.eye(len(m0)) - d[:, None] * t_ref
    try:
        xt = np.linalg.solve(a.T, t_ref.T)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("resolvent identity system is singular", condition=float(np.linalg.cond(a))) from exc
    t_new = xt.T
    if not np.all(np.isfinite(t_new)):
        raise NumericalError("resolvent identity produced non-finite values", condition=float(np.linalg.cond(a)))
    ext = None
    if t_ref_ext is not None:
        ext = t_ref_ext + (t_new * d[None, :]) @ t_ref_ext
    return t_new, ext


# ------------------------------------------------------------ Faddeev setup


@dataclass(frozen=True)
class FaddeevSetup:
    """z-independent ingredients of the Faddeev kernel on a Jacobi grid."""

    grids: JacobiGrid
    m: float
    relativistic: bool
    v_grid: np.ndarray  # (n_q, n_k, n_k) pair kernel per spectator momentum
    v_ext: np.ndarray  # (n_q, n_k, n_q, n_x) kernel at k_i, pi1(q, q', x)
    m0: np.ndarray  # (n_k, n_q) free mass
    recoupling: np.ndarray  # (n_q, n_q, n_x) R w_x q'^2 w_q'
    interp: np.ndarray  # (n_q, n_q, n_x, n_k) Lagrange weights for psi(pi2)
    threshold: float  # lowest 2+1 threshold (mass units)
    z_ref: float
    t_ref: np.ndarray = field(repr=False)  # (n_q, n_k, n_k)
    t_ref_ext: np.ndarray = field(repr=False)  # (n_q, n_k, n_q * n_x)


def _free_mass_3(m, k, q, relativistic):
    if relativistic:
        return np.sqrt(4 * (m * m + k * k) + q * q) + np.sqrt(m * m + q * q)
    return 3 * m + k * k / m + 0.75 * q * q / m


def _pair_threshold_mass(v: PartialWaveKernel, m: float, relativistic: bool) -> float:
    if relativistic:
        sol = solve_bound_states(coester_embed(v, m, m))
    else:
        sol = solve_nr_bound_states(v, m, m)
    pair = float(sol.bound_masses[0]) if len(sol.bound_masses) else 2 * m
    return m + pair


def _direct_t(v_grid, v_ext, z, m0, measure):
    a = np.eye(len(m0)) - v_grid * (measure / (z - m0))[None, :]
    return np.linalg.solve(a, v_grid), np.linalg.solve(a, v_ext)


def prepare_faddeev(
    v: PartialWaveKernel,
    m: float,
    grids: JacobiGrid,
    relativistic: bool = True,
    z_ref: float | None = None,
    n_s: int = 64,
    order: int = 8,
) -> FaddeevSetup:
    """Precompute the pair kernels, recoupling geometry and a reference t-matrix."""
    if len(v.grid) != len(grids.k_grid) or not np.allclose(v.grid.nodes, grids.k_grid.nodes, rtol=1e-14, atol=0.0):
        raise ParameterError("kernel grid must equal the Jacobi k grid")
    kg, qg = grids.k_grid, grids.q_grid
    k, q = kg.nodes, qg.nodes
    n_k, n_q, n_x = len(k), len(q), grids.n_x
    x, wx = grids.x
    qq, qp, xx = np.meshgrid(q, q, x, indexing="ij")
    pi1, pi2, r = permutation_geometry(qq, qp, xx, m, relativistic)
    recoupling = r * wx[None, None, :] * (q * q * qg.weights)[None, :, None]
    interp = interpolation_matrix(kg, pi2.ravel(), order).reshape(n_q, n_q, n_x, n_k)

    v_grid = np.empty((n_q, n_k, n_k))
    v_ext = np.empty((n_q, n_k, n_q * n_x))
    if relativistic:
        op = embed_bt(v, m)
        for a, qa in enumerate(q):
            cols = np.concatenate([k, pi1[a].ravel()])
            ker = op.interaction_kernel(k, cols, qa, n_s)
            vg = ker[:, :n_k]
            v_grid[a] = 0.5 * (vg + vg.T)
            v_ext[a] = ker[:, n_k:]
    else:
        vg = 0.5 * (v.values + v.values.T)
        for a in range(n_q):
            v_grid[a] = vg
            v_ext[a] = v(k[:, None], pi1[a].ravel()[None, :])
    m0 = _free_mass_3(m, k[:, None], q[None, :], relativistic)
    threshold = _pair_threshold_mass(v, m, relativistic)
    if z_ref is None:
        z_ref = threshold - 100.0
    measure = kg.weights * k * k
    t_ref = np.empty_like(v_grid)
    t_ref_ext = np.empty_like(v_ext)
    for a in range(n_q):
        t_ref[a], t_ref_ext[a] = _direct_t(v_grid[a], v_ext[a], z_ref, m0[:, a], measure)
    return FaddeevSetup(grids, m, relativistic, v_grid, v_ext, m0, recoupling, interp, threshold, float(z_ref), t_ref, t_ref_ext)


@dataclass(frozen=True)
class FaddeevKernel:
    z: float
    matrix: np.ndarray
    shape: tuple[int, int]


def embedded_t(setup: FaddeevSetup, z: float, direct: bool = False):
    """Per-q pair t-matrix at z on the grid and at the recoupled momenta."""
    k = setup.grids.k_grid.nodes
    measure = setup.grids.k_grid.weights * k * k
    n_q = setup.m0.shape[1]
    tg = np.empty_like(setup.v_grid)
    te = np.empty_like(setup.v_ext)
    for a in range(n_q):
        if direct:
            tg[a], te[a] = _direct_t(setup.v_grid[a], setup.v_ext[a], z, setup.m0[:, a], measure)
        else:
            tg[a], te[a] = offshell_extend(setup.t_ref[a], z, setup.z_ref, setup.m0[:, a], measure, setup.t_ref_ext[a])
    return tg, te


def assemble_faddeev_kernel(setup: FaddeevSetup, z: float, direct: bool = False) -> FaddeevKernel:
    """K(z)[(k,q),(k',q')] = G0(k,q) sum_x t(k, pi1; q, z) R psi-interpolation(pi2 -> k') q'^2 w_q'.

    The bosonic permutation P12 P23 + P13 P23 contributes the full x integral
    (no factor 1/2). t comes from the resolvent identity anchored at setup.z_ref
    unless ``direct`` is set.
    """
    if not z < setup.threshold:
        raise ParameterError(f"z = {z} is not below the 2+1 threshold {setup.threshold}")
    n_k, n_q = setup.m0.shape
    n_x = setup.grids.n_x
    _, te = embedded_t(setup, z, direct)
    g0 = 1.0 / (z - setup.m0)
    kmat = np.empty((n_k, n_q, n_k, n_q))
    for a in range(n_q):
        t = te[a].reshape(n_k, n_q, n_x) * setup.recoupling[a][None, :, :]
        kmat[:, a, :, :] = g0[:, a][:, None, None] * np.einsum("ibl,blj->ijb", t, setup.interp[a])
    if not np.all(np.isfinite(kmat)):
        raise NumericalError("Faddeev kernel has non-finite entries")
    return FaddeevKernel(float(z), kmat.reshape(n_k * n_q, n_k * n_q), (n_k, n_q))


def faddeev_mass_operator(setup: FaddeevSetup) -> np.ndarray:
    """Dense M0 + V1 (1 + P) in the Faddeev-component representation.

    H psi = z psi is algebraically the same as K(z) psi = psi with
    t = (1 - V G0)^-1 V on the same quadrature, so its real eigenvalues below the
    2+1 threshold are the bound-state masses of M = M0 + V1 + V2 + V3.
    """
    n_k, n_q = setup.m0.shape
    n_x = setup.grids.n_x
    k = setup.grids.k_grid.nodes
    measure = setup.grids.k_grid.weights * k * k
    h = np.zeros((n_k, n_q, n_k, n_q))
    for a in range(n_q):
        h[:, a, :, a] = setup.v_grid[a] * measure[None, :]
        v = setup.v_ext[a].reshape(n_k, n_q, n_x) * setup.recoupling[a][None, :, :]
        h[:, a, :, :] += np.einsum("ibl,blj->ijb", v, setup.interp[a])
    h = h.reshape(n_k * n_q, n_k * n_q)
    h[np.diag_indices_from(h)] += setup.m0.ravel()
    return h


def oracle_mass(setup: FaddeevSetup, imag_tol: float = 1e-6) -> float | None:
    """Lowest real eigenvalue of the dense operator below the 2+1 threshold."""
    vals = np.linalg.eigvals(faddeev_mass_operator(setup))
    real = vals[np.abs(vals.imag) <= imag_tol * np.abs(vals.real)].real
    real = real[real < setup.threshold]
    return float(np.min(real)) if len(real) else None


# --------------------------------------------------------------- bound state


@dataclass(frozen=True)
class TrimerSolution:
    relativistic: bool
    bound: bool
    M3: float | None
    threshold: float
    psi: np.ndarray | None
    eta_history: list
    grids: JacobiGrid
    m: float

    @property
    def binding_energy(self) -> float | None:
        return None if self.M3 is None else self.M3 - 3 * self.m

    def to_dict(self) -> dict:
        return {
            "relativistic": self.relativistic,
            "bound": self.bound,
            "M3_MeV": self.M3,
            "E3_MeV": self.binding_energy,
            "threshold_MeV": self.threshold,
            "eta_history": [[float(z), float(e)] for z, e in self.eta_history],
            "psi": None if self.psi is None else [float(x) for x in self.psi.ravel()],
            "grid": self.grids.describe(),
        }


def dominant_eta(setup: FaddeevSetup, z: float, method: str = "auto") -> tuple[float, np.ndarray]:
    kern = assemble_faddeev_kernel(setup, z)
    if method == "auto":
        method = "dense" if kern.matrix.shape[0] <= 400 else "arnoldi"
    eta, vec = largest_eigenvalue(kern.matrix, which="real", method=method)
    return float(np.real(eta)), np.real(vec)


def solve_trimer(
    v: PartialWaveKernel,
    m: float,
    grids: JacobiGrid,
    relativistic: bool = True,
    z_bracket: tuple[float, float] | None = None,
    n_scan: int = 20,
    xtol: float = 1e-8,
    setup: FaddeevSetup | None = None,
) -> TrimerSolution:
    """Ground-state trimer mass from eta(z) = 1, eta the largest-real-part eigenvalue of K(z).

    The scan runs over ``z_bracket`` (default: 100 MeV below the 2+1 threshold
    up to just below it, widened downwards if the ground state lies deeper), checks that eta grows with z, and refines the first
    crossing with Brent's method to ``xtol`` MeV.
    """
    if setup is None:
        setup = prepare_faddeev(v, m, grids, relativistic)
    thr = setup.threshold
    lo, hi = z_bracket if z_bracket is not None else (thr - 100.0, thr - 1e-6)
    hi = min(hi, thr - 1e-9)
    if not lo < hi:
        raise ParameterError("empty search bracket")
    if np.max(np.abs(setup.v_grid)) == 0.0:
        return TrimerSolution(relativistic, False, None, thr, None, [], grids, m)
    if z_bracket is None:
        # a deep trimer lies below the default window: widen it until eta(lo) < 1
        while dominant_eta(setup, lo)[0] >= 1.0:
            if thr - lo > 2 * setup.m:
                raise NumericalError(f"eta(z) >= 1 down to z = {lo}; no bracket for the ground state")
            lo = thr - 2 * (thr - lo)
    zs = np.linspace(lo, hi, n_scan)
    history = []
    etas = []
    for z in zs:
        eta, _ = dominant_eta(setup, z)
        history.append((float(z), eta))
        etas.append(eta)
    etas = np.array(etas)
    if np.any(np.diff(etas) <= 0):
        raise NumericalError(f"eta(z) is not increasing over the scan: {list(zip(zs.tolist(), etas.tolist()))}")
    above = np.nonzero(etas >= 1.0)[0]
    if len(above) == 0:
        return TrimerSolution(relativistic, False, None, thr, None, history, grids, m)
    i = int(above[0])
    if i == 0:
        raise NumericalError(f"eta(z) >= 1 already at the lower end z = {zs[0]}; widen the bracket")

    def f(z):
        eta, _ = dominant_eta(setup, z)
        history.append((float(z), eta))
        return eta - 1.0

    z3 = brentq(f, zs[i - 1], zs[i], xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    eta, psi = dominant_eta(setup, z3)
    history.append((float(z3), eta))
    psi = psi.reshape(setup.m0.shape)
    # normalise: unit Euclidean norm, largest component positive
    psi = psi / np.linalg.norm(psi)
    j = np.unravel_index(np.argmax(np.abs(psi)), psi.shape)
    psi = psi * np.sign(psi[j])
    return TrimerSolution(relativistic, True, float(z3), thr, psi, history, grids, m)


def solve_trimer_nonrel(v: PartialWaveKernel, m: float, grids: JacobiGrid, **kwargs) -> TrimerSolution:
    return solve_trimer(v, m, grids, relativistic=False, **kwargs)


def _pair_particles(k_vec, q_vec, m, relativistic):
    """Rest-frame momenta (p1, p2, p3) of the (12)(3) configuration (k, q)."""
    p3 = q_vec
    if not relativistic:
        return -0.5 * q_vec + k_vec, -0.5 * q_vec - k_vec, p3
    ek = _omega(m, np.linalg.norm(k_vec, axis=-1))
    m12 = 2 * ek
    ptot = -q_vec
    e = np.sqrt(m12**2 + np.sum(ptot * ptot, axis=-1))

    def boost(kv):
        g = np.sum(ptot * kv, axis=-1)
        return kv + ptot * (g / (m12 * (e + m12)) + ek / m12)[..., None]

    return boost(k_vec), boost(-k_vec), p3


def _jacobian_vec(p1, p2, p3, m, relativistic):
    if not relativistic:
        return np.ones(p1.shape[:-1])
    w1 = _omega(m, np.linalg.norm(p1, axis=-1))
    w2 = _omega(m, np.linalg.norm(p2, axis=-1))
    f1 = np.concatenate([w1[..., None], p1], axis=-1)
    f2 = np.concatenate([w2[..., None], p2], axis=-1)
    k = np.linalg.norm(relative_momentum(f1, f2), axis=-1)
    m12 = 2 * _omega(m, k)
    q2 = np.sum(p3 * p3, axis=-1)
    return w1 * w2 * m12 / (_omega(m, k) ** 2 * np.sqrt(m12**2 + q2))


def permutation_matrix(grids: JacobiGrid, m: float, relativistic: bool = True) -> np.ndarray:
    """Grid representation of P = P12 P23 + P13 P23 on s-wave functions phi(k, q).

    The cyclic relabelling acts on particle-momentum wave functions; in (k, q)
    variables it carries the square root of the ratio of partition Jacobians.
    Off-grid values use global interpolation in both mapped variables.
    """
    kg, qg = grids.k_grid, grids.q_grid
    k, q = kg.nodes, qg.nodes
    x, wx = grids.x
    kk, qq, xx = np.meshgrid(k, q, x, indexing="ij")
    st = np.sqrt(1 - xx * xx)
    zero = np.zeros_like(kk)
    k_vec = np.stack([kk * st, zero, kk * xx], axis=-1)
    q_vec = np.stack([zero, zero, qq], axis=-1)
    p1, p2, p3 = _pair_particles(k_vec, q_vec, m, relativistic)
    # cyclic relabelling: the new (12)(3) pair is (p2, p3), spectator p1
    ja = _jacobian_vec(p1, p2, p3, m, relativistic)
    jb = _jacobian_vec(p2, p3, p1, m, relativistic)
    if relativistic:
        f2 = np.concatenate([_omega(m, np.linalg.norm(p2, axis=-1))[..., None], p2], axis=-1)
        f3 = np.concatenate([_omega(m, np.linalg.norm(p3, axis=-1))[..., None], p3], axis=-1)
        kp = np.linalg.norm(relative_momentum(f2, f3), axis=-1)
    else:
        kp = np.linalg.norm(0.5 * (p2 - p3), axis=-1)
    qp = np.linalg.norm(p1, axis=-1)
    fac = np.sqrt(ja / jb) * wx[None, None, :]
    lk = global_interpolation_matrix(kg, kp.ravel()).reshape(kp.shape + (len(k),))
    lq = global_interpolation_matrix(qg, qp.ravel()).reshape(qp.shape + (len(q),))
    out = np.einsum("iax,iaxj,iaxb->iajb", fac, lk, lq)
    return out.reshape(len(k) * len(q), len(k) * len(q))


def total_wavefunction(psi: np.ndarray, grids: JacobiGrid, m: float, p1, p2, p3, relativistic: bool = True) -> np.ndarray:
    """Psi = (1 + P) psi at rest-frame particle momenta (arrays of shape (..., 3)).

    Built as the sum over cyclic relabellings of the component, each converted
    to the particle-momentum normalisation by its partition Jacobian; the
    component is interpolated globally in both mapped variables.
    """
    psi = np.asarray(psi, dtype=float).reshape(grids.shape)
    p = [np.asarray(a, dtype=float) for a in (p1, p2, p3)]
    out = 0.0
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        if relativistic:
            fa = np.concatenate([_omega(m, np.linalg.norm(p[a], axis=-1))[..., None], p[a]], axis=-1)
            fb = np.concatenate([_omega(m, np.linalg.norm(p[b], axis=-1))[..., None], p[b]], axis=-1)
            k = np.linalg.norm(relative_momentum(fa, fb), axis=-1)
        else:
            k = np.linalg.norm(0.5 * (p[a] - p[b]), axis=-1)
        q = np.linalg.norm(p[c], axis=-1)
        lk = global_interpolation_matrix(grids.k_grid, k.ravel())
        lq = global_interpolation_matrix(grids.q_grid, q.ravel())
        val = np.einsum("ni,ij,nj->n", lk, psi, lq).reshape(k.shape)
        out = out + val / np.sqrt(_jacobian_vec(p[a], p[b], p[c], m, relativistic))
    return out


def symmetrization_residual(
    psi: np.ndarray, grids: JacobiGrid, m: float, relativistic: bool = True, n_points: int = 200, seed: int = 0
) -> float:
    """max |Psi(sigma p) - Psi(p)| / max |Psi| over all six permutations sigma.

    Configurations are drawn from the grid (k, q) pairs at random directions
    plus random rest-frame momenta; the residual tests that the component,
    recoupled with its Jacobians, assembles into a fully symmetric state.
    """
    import itertools

    rng = np.random.default_rng(seed)
    scale = float(np.median(grids.k_grid.nodes))

    def rand_dirs(n):
        d = rng.normal(size=(n, 3))
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    ki = rng.integers(0, len(grids.k_grid), n_points)
    qi = rng.integers(0, len(grids.q_grid), n_points)
    k_vec = grids.k_grid.nodes[ki, None] * rand_dirs(n_points)
    q_vec = grids.q_grid.nodes[qi, None] * rand_dirs(n_points)
    a = _pair_particles(k_vec, q_vec, m, relativistic)
    x = rng.normal(scale=scale, size=(n_points, 3))
    y = rng.normal(scale=scale, size=(n_points, 3))
    b = (x, y, -x - y)
    res = 0.0
    for parts in (a, b):
        ref = total_wavefunction(psi, grids, m, *parts, relativistic=relativistic)
        norm = np.max(np.abs(ref))
        for perm in itertools.permutations(range(3)):
            val = total_wavefunction(psi, grids, m, *(parts[i] for i in perm), relativistic=relativistic)
            res = max(res, float(np.max(np.abs(val - ref)) / norm))
    return res
