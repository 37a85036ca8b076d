"""Two-body Bakamjian-Thomas dynamics in the s-wave.

Kernel convention: <k'|v|k> is used with the measure k^2 dk, so that the
Lippmann-Schwinger equation reads T = v + int p^2 dp v G0 T and the on-shell
K-matrix gives tan(delta) = -pi rho K(k0, k0) with rho = k0^2 / (d eps/dk).
For a local potential V(r) this is

    v_0(k', k) = (2/pi) int r^2 j0(k'r) V(r) j0(kr) dr.

Matrices acting on a grid are kept in the symmetric weighted form
A_ij = s_i a(k_i, k_j) s_j with s_i = sqrt(w_i) k_i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolation, NumericalError, ParameterError, UnphysicalPotentialError
from .irreps import BasisForm, WignerFunctionValue, wigner_function
from .numerics import DenseOperator, QuadratureGrid, gauss_legendre, graded_eigensolve, make_grid

__all__ = [
    "MTParameters",
    "PartialWaveKernel",
    "MassOperator",
    "TwoBodySolution",
    "reduced_mass",
    "free_mass",
    "malfliet_tjon_potential",
    "malfliet_tjon_kernel",
    "nr_hamiltonian",
    "coester_embed",
    "solve_bound_states",
    "solve_nr_bound_states",
    "solve_phase_shifts",
    "embedded_interaction",
    "sqrt_function_kernel",
    "operator_function_kernel",
    "complex_step_derivative",
    "lippmann_schwinger_halfshell",
    "off_node_kernel",
    "lippmann_schwinger_phase",
    "on_shell_s_matrix",
    "build_dynamical_irrep",
]

NUCLEON_MASS = 938.92


@dataclass(frozen=True)
class MTParameters:
    """Yukawa strengths (dimensionless, hbar c = 1) and ranges (MeV).

    V(r) = lambda_r exp(-mu_r r)/r + lambda_a exp(-mu_a r)/r; the defaults are
    the Malfliet-Tjon V values customary in three-boson benchmarks.
    """

    lambda_r: float = 7.291
    mu_r: float = 613.69
    lambda_a: float = -3.1769
    mu_a: float = 305.86

    def __post_init__(self):
        if not (self.mu_r > 0 and self.mu_a > 0):
            raise ParameterError("Yukawa ranges must be positive")

    def terms(self) -> list[tuple[float, float]]:
        return [(self.lambda_r, self.mu_r), (self.lambda_a, self.mu_a)]

    def to_dict(self) -> dict:
        return {"lambda_r": self.lambda_r, "mu_r": self.mu_r, "lambda_a": self.lambda_a, "mu_a": self.mu_a}


def reduced_mass(m1: float, m2: float) -> float:
    return m1 * m2 / (m1 + m2)


def free_mass(m1: float, m2: float, k) -> np.ndarray:
    k2 = np.asarray(k, dtype=float) ** 2
    return np.sqrt(m1 * m1 + k2) + np.sqrt(m2 * m2 + k2)


def malfliet_tjon_potential(params: MTParameters, kp, k) -> np.ndarray:
    """s-wave projection sum_i lambda_i/(2 pi k k') ln[((k+k')^2+mu_i^2)/((k-k')^2+mu_i^2)].

    Evaluated as lambda/(2 pi) * 4/((k-k')^2+mu^2) * log1p(x)/x, x = 4kk'/((k-k')^2+mu^2),
    which is finite at k = 0 or k' = 0.
    """
    kp = np.asarray(kp, dtype=float)
    k = np.asarray(k, dtype=float)
    out = np.zeros(np.broadcast(kp, k).shape)
    for lam, mu in params.terms():
        if lam == 0.0:
            continue
        den = (k - kp) ** 2 + mu * mu
        x = 4.0 * k * kp / den
        safe = np.where(x > 0, x, 1.0)
        ratio = np.where(x > 1e-12, np.log1p(safe) / safe, 1.0 - 0.5 * x)
        out = out + lam / (2 * np.pi) * 4.0 / den * ratio
    return out


@dataclass(frozen=True)
class PartialWaveKernel:
    """Partial-wave interaction <k' c'|v^j|k c> on a grid, with an optional off-grid evaluator."""

    j: float
    channels: tuple
    grid: QuadratureGrid
    values: np.ndarray
    func: Callable | None = field(default=None, repr=False, compare=False)
    tol: float = 1e-12

    def __post_init__(self):
        v = np.array(self.values)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        n = len(self.grid) * len(self.channels)
        if v.shape != (n, n):
            raise ContractViolation(f"kernel shape {v.shape} does not match grid x channels = {n}")
        scale = max(1e-300, float(np.max(np.abs(v)))) if v.size else 1.0
        if v.size and float(np.max(np.abs(v - v.conj().T))) > self.tol * scale:
            raise ContractViolation("partial-wave kernel is not Hermitian")

    def __call__(self, kp, k) -> np.ndarray:
        if self.func is None:
            raise ParameterError("kernel has no off-grid evaluator")
        return self.func(kp, k)

    @classmethod
    def from_function(cls, func, grid: QuadratureGrid) -> "PartialWaveKernel":
        k = grid.nodes
        return cls(0, ((0, 0),), grid, func(k[:, None], k[None, :]), func)

    @classmethod
    def zero(cls, grid: QuadratureGrid) -> "PartialWaveKernel":
        return cls.from_function(lambda kp, k: np.zeros(np.broadcast(kp, k).shape), grid)

    def weighted(self) -> np.ndarray:
        s = np.sqrt(self.grid.weights) * self.grid.nodes
        return s[:, None] * self.values * s[None, :]


def malfliet_tjon_kernel(params: MTParameters, grid: QuadratureGrid) -> PartialWaveKernel:
    return PartialWaveKernel.from_function(lambda kp, k: malfliet_tjon_potential(params, kp, k), grid)


def nr_hamiltonian(v: PartialWaveKernel, m1: float, m2: float) -> np.ndarray:
    """Weighted-form h_nr = k^2/2mu + v on the kernel's grid."""
    mu = reduced_mass(m1, m2)
    k = v.grid.nodes
    h = v.weighted() + np.diag(k * k / (2 * mu))
    return 0.5 * (h + h.T)


def _embed_values(e: np.ndarray, m1: float, m2: float) -> np.ndarray:
    mu = reduced_mass(m1, m2)
    q = 2 * mu * e
    if np.any(q + m1 * m1 < 0) or np.any(q + m2 * m2 < 0):
        bad = float(np.min(e))
        raise UnphysicalPotentialError(f"eigenvalue {bad:.6g} MeV maps to an imaginary mass")
    return np.sqrt(q + m1 * m1) + np.sqrt(q + m2 * m2)


@dataclass(frozen=True)
class MassOperator:
    """Two-body mass operator in weighted form: matrix = diag(kinetic) + interaction."""

    m1: float
    m2: float
    grid: QuadratureGrid
    kinetic: np.ndarray
    interaction: np.ndarray
    tol: float = 1e-12

    def __post_init__(self):
        for name in ("kinetic", "interaction"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        # raises ContractViolation when not Hermitian
        DenseOperator(self.matrix, hermitian=True, tol=self.tol)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.kinetic) + self.interaction

    @property
    def threshold(self) -> float:
        return self.m1 + self.m2


def coester_embed(v_nr: PartialWaveKernel, m1: float, m2: float, grid: QuadratureGrid | None = None) -> MassOperator:
    """M = sqrt(q + m1^2) + sqrt(q + m2^2) with q = k^2 + 2 mu v_nr, by spectral calculus."""
    if not (m1 > 0 and m2 > 0):
        raise ParameterError("masses must be positive")
    if grid is not None and len(grid) != len(v_nr.grid):
        raise ParameterError("grid does not match the kernel's grid")
    k = v_nr.grid.nodes
    w = v_nr.weighted()
    e, u = graded_eigensolve(k * k / (2 * reduced_mass(m1, m2)), 0.5 * (w + w.T))
    mvals = _embed_values(e, m1, m2)
    mmat = (u * mvals) @ u.T
    mmat = 0.5 * (mmat + mmat.T)
    kin = free_mass(m1, m2, v_nr.grid.nodes)
    return MassOperator(m1, m2, v_nr.grid, kin, mmat - np.diag(kin))


@dataclass(frozen=True)
class TwoBodySolution:
    grid: QuadratureGrid
    bound_masses: np.ndarray
    bound_wavefunctions: np.ndarray
    threshold: float
    phase_k: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phase_shifts: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def binding_energies(self) -> np.ndarray:
        return np.asarray(self.bound_masses) - self.threshold

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.describe(),
            "threshold_MeV": float(self.threshold),
            "bound_masses_MeV": [float(x) for x in self.bound_masses],
            "binding_energies_MeV": [float(x) for x in self.binding_energies],
        }


def _bound_from_weighted(diag, rest, grid: QuadratureGrid, threshold: float, residual_tol: float = 1e-9):
    vals, vecs = graded_eigensolve(diag, rest)
    mat = np.diag(diag) + rest
    sel = vals < threshold
    vals, vecs = vals[sel], vecs[:, sel]
    if len(vals):
        res = np.linalg.norm(mat @ vecs - vecs * vals, axis=0)
        # relative to the operator norm, which the top grid nodes dominate
        scale = max(1.0, float(np.max(np.abs(mat))))
        if np.max(res) > residual_tol * scale:
            raise NumericalError(f"bound-state residual {np.max(res):.3e} too large")
    s = np.sqrt(grid.weights) * grid.nodes
    phi = vecs / s[:, None]
    # sign convention: wavefunction positive at the lowest momentum
    sign = np.where(phi[0] < 0, -1.0, 1.0) if len(vals) else np.ones(0)
    return vals, (phi * sign).T


def solve_bound_states(op: MassOperator) -> TwoBodySolution:
    """Discrete mass eigenvalues below m1 + m2 with wavefunctions normalised as sum w k^2 phi^2 = 1."""
    vals, phi = _bound_from_weighted(op.kinetic, op.interaction, op.grid, op.threshold)
    return TwoBodySolution(op.grid, vals, phi, op.threshold)


def solve_nr_bound_states(v: PartialWaveKernel, m1: float, m2: float) -> TwoBodySolution:
    """Bound states of h_nr; energies are reported as masses m1 + m2 + e."""
    w = v.weighted()
    k = v.grid.nodes
    vals, phi = _bound_from_weighted(k * k / (2 * reduced_mass(m1, m2)), 0.5 * (w + w.T), v.grid, 0.0)
    return TwoBodySolution(v.grid, m1 + m2 + vals, phi, m1 + m2)


def _resolvent_parts(v_nr: PartialWaveKernel, mu: float, rows, cols):
    grid = v_nr.grid
    k = grid.nodes
    rows = np.atleast_1d(np.asarray(rows, dtype=float))
    cols = np.atleast_1d(np.asarray(cols, dtype=float))
    u_grid = 2 * mu * 0.5 * (v_nr.values + v_nr.values.T)
    u_rows = 2 * mu * v_nr(rows[:, None], k[None, :])
    u_cols = 2 * mu * v_nr(k[:, None], cols[None, :])
    u_rc = 2 * mu * v_nr(rows[:, None], cols[None, :])
    return rows, cols, u_grid, u_rows, u_cols, u_rc


def sqrt_function_kernel(v_nr: PartialWaveKernel, mu: float, shifts, rows, cols, n_s: int = 64) -> np.ndarray:
    """Kernel of F(Q) - F(K^2) for F(x) = sum_i alpha_i sqrt(x + c_i), Q = k^2 + 2 mu v.

    ``shifts`` lists (alpha_i, c_i). Each square root is analytic off
    (-inf, -c_i], so moving the Cauchy contour onto the cut gives

        sqrt(Q + c) - sqrt(K^2 + c) = (1/pi) int_0^inf sqrt(s) [(z - Q)^-1 - (z - K^2)^-1] ds,  z = -c - s.

    The resolvent difference has kernel t(k',k; z)/((z - k'^2)(z - k^2)) with
    t = U + U (z - K^2)^-1 t, U = 2 mu v, extended off the grid by Nystrom. The
    Born term integrates in closed form to U/(sqrt(k'^2 + c) + sqrt(k^2 + c));
    only the remainder is integrated numerically. z stays far below the
    spectrum, so no pole is ever approached. Requires c_i > -min spectrum(Q).
    """
    grid = v_nr.grid
    k, w = grid.nodes, grid.weights
    rows, cols, u_grid, u_rows, u_cols, u_rc = _resolvent_parts(v_nr, mu, rows, cols)
    x, wx = gauss_legendre(n_s, 0.0, 1.0)
    eye = np.eye(len(k))
    out = np.zeros((len(rows), len(cols)))
    for alpha, c in shifts:
        er, ec = np.sqrt(c + rows * rows), np.sqrt(c + cols * cols)
        acc = u_rc / (er[:, None] + ec[None, :])
        for xi, wi in zip(x, wx):
            s = c * (xi / (1 - xi)) ** 2
            ds = 2 * c * xi / (1 - xi) ** 3 * wi
            z = -c - s
            g0 = w * k * k / (z - k * k)
            t = np.linalg.solve(eye - u_grid * g0[None, :], u_cols)
            rest = (u_rows * g0[None, :]) @ t
            acc += np.sqrt(s) * ds / np.pi * rest / ((z - rows * rows)[:, None] * (z - cols * cols)[None, :])
        out += alpha * acc
    return out


def operator_function_kernel(v_nr: PartialWaveKernel, mu: float, func, rows, cols, c0: float, n_y: int = 128) -> np.ndarray:
    """Kernel of f(Q) - f(K^2) for any f analytic in Re x > c0 (Q = k^2 + 2 mu v).

    The Cauchy contour is the vertical line Re z = c0, which must lie between
    the singularities of f and the spectrum of Q. By conjugation symmetry

        f(Q) - f(K^2) = -(1/pi) Re int_0^inf f(c0 + iy) [(z - Q)^-1 - (z - K^2)^-1] dy.

    The Born term gives U times the divided difference of f exactly.
    ``func`` must accept complex arrays.
    """
    grid = v_nr.grid
    k, w = grid.nodes, grid.weights
    rows, cols, u_grid, u_rows, u_cols, u_rc = _resolvent_parts(v_nr, mu, rows, cols)
    out = u_rc * _divided_difference(func, rows[:, None] ** 2, cols[None, :] ** 2)
    x, wx = gauss_legendre(n_y, 0.0, 1.0)
    scale = max(abs(c0), 1.0)
    eye = np.eye(len(k))
    acc = np.zeros(out.shape, dtype=complex)
    for xi, wi in zip(x, wx):
        y = scale * (xi / (1 - xi)) ** 2
        dy = 2 * scale * xi / (1 - xi) ** 3 * wi
        z = c0 + 1j * y
        g0 = w * k * k / (z - k * k)
        t = np.linalg.solve(eye - u_grid * g0[None, :], u_cols.astype(complex))
        rest = (u_rows * g0[None, :]) @ t
        acc += func(z) * dy * rest / ((z - rows * rows)[:, None] * (z - cols * cols)[None, :])
    return out - acc.real / np.pi


def complex_step_derivative(func, x) -> np.ndarray:
    """f'(x) for f real-analytic, exact to rounding."""
    x = np.asarray(x, dtype=float)
    h = 1e-20 * np.maximum(1.0, np.abs(x))
    return np.imag(func(x + 1j * h)) / h


def _divided_difference(func, x, y) -> np.ndarray:
    """(f(x) - f(y))/(x - y), falling back to f'(y) when x and y coincide."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    d = x - y
    close = np.abs(d) <= 1e-9 * np.maximum(1.0, np.abs(x))
    dd = (np.real(func(x)) - np.real(func(y))) / np.where(close, 1.0, d)
    return np.where(close, complex_step_derivative(func, y), dd)


def embedded_interaction(v_nr: PartialWaveKernel, m1: float, m2: float, points, n_s: int = 64) -> np.ndarray:
    """Kernel of F(k^2 + 2 mu v) - F(k^2), F(x) = sqrt(x + m1^2) + sqrt(x + m2^2), between arbitrary momenta."""
    mu = reduced_mass(m1, m2)
    out = sqrt_function_kernel(v_nr, mu, [(1.0, m1 * m1), (1.0, m2 * m2)], points, points, n_s)
    return 0.5 * (out + out.T)


def lippmann_schwinger_halfshell(
    kernel_aug: np.ndarray,
    grid: QuadratureGrid,
    k0: float,
    eps,
    deps,
    outgoing: bool = False,
    extra_rows: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None, float]:
    """Half-shell solution of T = V + V [1/(eps(k0) - eps + i0)] T (or its principal value, K).

    ``kernel_aug`` is V on the grid augmented by k0 as its last point, i.e.
    shape (n+1, n+1) over (k_1..k_n, k0). ``eps`` is the energy as a function of
    momentum and ``deps`` its derivative. The principal value is regularised
    by subtracting the on-shell point: with r(p) = (k0^2 - p^2)/(eps0 - eps(p)),
    P int p^2 f(p)/(eps0 - eps(p)) dp = sum w [p^2 r f - k0^2 r0 f0]/(k0^2 - p^2);
    outgoing waves add -i pi rho f0 with rho = k0^2/eps'(k0).
    ``extra_rows`` (m, n+1) holds V(k', .) for off-grid k' and yields T(k', k0)
    by the Nystrom extension. Returns (values on grid + k0, extra values, rho).
    """
    k, w = grid.nodes, grid.weights
    n = len(k)
    if np.any(np.abs(k - k0) <= 1e-10 * k0):
        raise ParameterError("on-shell momentum coincides with a grid node; shift it or change the grid")
    e0 = float(eps(k0))
    d0 = float(deps(k0))
    r0 = 2 * k0 / d0
    rho = k0**2 / d0
    r = (k0**2 - k**2) / (e0 - eps(k))
    coeff = np.zeros(n + 1, dtype=complex if outgoing else float)
    coeff[:n] = w * k**2 * r / (k0**2 - k**2)
    coeff[n] = -(k0**2) * r0 * np.sum(w / (k0**2 - k**2))
    if outgoing:
        coeff[n] -= 1j * np.pi * rho
    a = np.eye(n + 1) - kernel_aug * coeff[None, :]
    rhs = kernel_aug[:, n]
    try:
        x = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular Lippmann-Schwinger system", condition=float(np.linalg.cond(a))) from exc
    extra = None
    if extra_rows is not None:
        extra = extra_rows[:, n] + (extra_rows * coeff[None, :]) @ x
    return x, extra, rho


def lippmann_schwinger_phase(kernel_aug: np.ndarray, grid: QuadratureGrid, k0: float, eps, deps) -> float:
    """Phase shift (modulo pi, in (-pi/2, pi/2]) from tan(delta) = -pi rho K(k0, k0)."""
    x, _, rho = lippmann_schwinger_halfshell(kernel_aug, grid, k0, eps, deps)
    return float(np.arctan(-np.pi * rho * x[-1]))


def on_shell_s_matrix(kernel_aug: np.ndarray, grid: QuadratureGrid, k0: float, eps, deps) -> complex:
    """S = 1 - 2 pi i rho T(k0, k0) from the outgoing-wave equation."""
    x, _, rho = lippmann_schwinger_halfshell(kernel_aug, grid, k0, eps, deps, outgoing=True)
    return complex(1 - 2j * np.pi * rho * x[-1])


def _augmented(func, grid: QuadratureGrid, k0: float) -> np.ndarray:
    pts = np.append(grid.nodes, k0)
    return func(pts[:, None], pts[None, :])


def solve_phase_shifts(
    v: PartialWaveKernel,
    relativistic: bool,
    k_on,
    m1: float,
    m2: float,
    method: str = "invariance",
) -> np.ndarray:
    """s-wave phase shifts (radians) at the on-shell momenta ``k_on``.

    Nonrelativistic: Lippmann-Schwinger for h_nr. Relativistic with
    ``method='invariance'``: the mass operator is a function of h_nr, so the
    same k-space equation is solved. ``method='direct'`` instead solves the
    equation for M with free mass w1 + w2 and the embedded kernel
    F(k^2 + 2 mu v) - F(k^2) obtained from the resolvent integral.
    """
    mu = reduced_mass(m1, m2)
    k_on = np.atleast_1d(np.asarray(k_on, dtype=float))
    grid = v.grid
    if np.any(k_on <= 0):
        raise ParameterError("on-shell momenta must be positive")
    if np.any(k_on > grid.nodes[-1]):
        raise ParameterError("on-shell momentum beyond grid coverage")
    if method not in ("invariance", "direct"):
        raise ParameterError(f"unknown method {method!r}")
    if not relativistic or method == "invariance":
        def eps(p):
            return np.asarray(p) ** 2 / (2 * mu)

        def deps(p):
            return np.asarray(p) / mu

        def phase(k0, v):
            return lippmann_schwinger_phase(_augmented(v, v.grid, k0), v.grid, k0, eps, deps)
    else:
        def eps(p):
            return free_mass(m1, m2, p)

        def deps(p):
            p = np.asarray(p, dtype=float)
            return p / np.sqrt(m1 * m1 + p * p) + p / np.sqrt(m2 * m2 + p * p)

        def phase(k0, v):
            vf = embedded_interaction(v, m1, m2, np.append(v.grid.nodes, k0))
            return lippmann_schwinger_phase(vf, v.grid, k0, eps, deps)

    return np.array([phase(k0, off_node_kernel(v, k0)) for k0 in k_on])


def off_node_kernel(v: PartialWaveKernel, k0: float, min_gap: float = 0.01) -> PartialWaveKernel:
    """The kernel itself, or one on a rescaled grid when k0 is within ``min_gap`` node spacings of a node.

    The subtraction is exact in the limit but the discrete equations lose
    accuracy when the on-shell point nearly coincides with a node; rescaling
    the mapping puts k0 midway between two nodes instead.
    """
    k = v.grid.nodes
    i = int(np.argmin(np.abs(k - k0)))
    j = i + 1 if i + 1 < len(k) else i - 1
    if abs(k0 - k[i]) > min_gap * abs(k[j] - k[i]):
        return v
    if v.func is None:
        raise ParameterError("on-shell point on a grid node and the kernel cannot be re-evaluated")
    factor = k0 / (0.5 * (k[i] + k[j]))
    grid = make_grid(len(k), v.grid.scale * factor, v.grid.mapping)
    return PartialWaveKernel.from_function(v.func, grid)


def build_dynamical_irrep(solution: TwoBodySolution, form: BasisForm | str, index: int = 0):
    """Wigner-function evaluator of a bound state: irreps.wigner_function with m -> lambda."""
    if len(solution.bound_masses) <= index:
        raise ParameterError("no bound state with that index")
    lam_mass = float(solution.bound_masses[index])
    form = BasisForm(form)

    def evaluate(j, lam, a, source) -> WignerFunctionValue:
        return wigner_function(form, lam_mass, j, lam, a, source)

    evaluate.mass = lam_mass
    evaluate.form = form
    return evaluate
