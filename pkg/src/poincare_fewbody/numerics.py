"""Quadrature grids, local interpolation and dense eigen-solvers.

All momenta and masses in the package are in MeV with hbar = c = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import ContractViolation, NumericalError, ParameterError

__all__ = [
    "Mapping",
    "QuadratureGrid",
    "DenseOperator",
    "make_grid",
    "gauss_legendre",
    "lagrange_weights",
    "interpolation_matrix",
    "global_interpolation_matrix",
    "symmetric_eigensolve",
    "graded_eigensolve",
    "largest_eigenvalue",
]


class Mapping(str, Enum):
    RATIONAL = "rational"
    TANGENT = "tangent"


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuadratureGrid:
    """Mapped Gauss-Legendre rule on [0, inf).

    ``abscissae`` are the underlying Gauss-Legendre points in (-1, 1); the
    interpolation helpers work in that variable.
    """

    nodes: np.ndarray
    weights: np.ndarray
    mapping: Mapping
    scale: float
    abscissae: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes))
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "abscissae", _frozen(self.abscissae))
        if self.nodes.shape != self.weights.shape:
            raise ParameterError("nodes and weights differ in length")

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.nodes)))

    def to_abscissa(self, k) -> np.ndarray:
        """Inverse of the node map, k -> x in (-1, 1)."""
        k = np.asarray(k, dtype=float)
        if self.mapping is Mapping.RATIONAL:
            return (k - self.scale) / (k + self.scale)
        return 4.0 / np.pi * np.arctan(k / self.scale) - 1.0

    def describe(self) -> dict:
        return {"n": len(self), "scale_MeV": self.scale, "mapping": self.mapping.value}


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def make_grid(n: int, scale: float, mapping: Mapping | str = Mapping.RATIONAL) -> QuadratureGrid:
    """Gauss-Legendre rule mapped onto [0, inf).

    rational: k = scale (1+x)/(1-x);  tangent: k = scale tan(pi (1+x)/4).
    """
    if int(n) != n or n < 2:
        raise ParameterError(f"grid needs n >= 2 nodes, got {n!r}")
    if not (np.isfinite(scale) and scale > 0):
        raise ParameterError(f"grid scale must be positive, got {scale!r}")
    mapping = Mapping(mapping)
    x, w = np.polynomial.legendre.leggauss(int(n))
    if mapping is Mapping.RATIONAL:
        k = scale * (1.0 + x) / (1.0 - x)
        dk = 2.0 * scale / (1.0 - x) ** 2
    else:
        t = np.pi * (1.0 + x) / 4.0
        k = scale * np.tan(t)
        dk = scale * np.pi / 4.0 / np.cos(t) ** 2
    return QuadratureGrid(k, w * dk, mapping, float(scale), x)


def lagrange_weights(grid: QuadratureGrid, points, order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Local Lagrange interpolation onto arbitrary momenta.

    Interpolation is done in the Gauss-Legendre variable, using the ``order``
    nodes closest to each point. Returns ``(index, weight)`` arrays of shape
    ``points.shape + (order,)`` so that f(p) ~ sum(weight * f[index]).
    """
    pts = np.asarray(points, dtype=float)
    x = grid.abscissae
    n = len(x)
    order = min(order, n)
    u = grid.to_abscissa(pts.ravel())
    # first stencil node: centre the stencil on the bracketing interval
    j = np.searchsorted(x, u)
    start = np.clip(j - order // 2, 0, n - order)
    idx = start[:, None] + np.arange(order)[None, :]
    xs = x[idx]
    wts = np.ones_like(xs)
    for a in range(order):
        for b in range(order):
            if a != b:
                wts[:, a] *= (u - xs[:, b]) / (xs[:, a] - xs[:, b])
    shape = pts.shape + (order,)
    return idx.reshape(shape), wts.reshape(shape)


def interpolation_matrix(grid: QuadratureGrid, points, order: int = 4) -> np.ndarray:
    """Dense (len(points), len(grid)) matrix form of :func:`lagrange_weights`."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    idx, wts = lagrange_weights(grid, pts, order)
    out = np.zeros((len(pts), len(grid)))
    np.add.at(out, (np.repeat(np.arange(len(pts)), idx.shape[1]), idx.ravel()), wts.ravel())
    return out


def global_interpolation_matrix(grid: QuadratureGrid, points) -> np.ndarray:
    """Interpolation through all grid nodes (barycentric form, Gauss-Legendre variable).

    Spectrally accurate for functions smooth in the mapped variable; used where
    local stencils are not accurate enough.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    x = grid.abscissae
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bw = 1.0 / np.prod(diff, axis=1)
    bw = bw / np.max(np.abs(bw))
    u = grid.to_abscissa(pts)
    d = u[:, None] - x[None, :]
    hit = d == 0.0
    d[hit] = 1.0
    c = bw[None, :] / d
    out = c / np.sum(c, axis=1, keepdims=True)
    rows = np.any(hit, axis=1)
    out[rows] = hit[rows].astype(float)
    return out


@dataclass(frozen=True)
class DenseOperator:
    """Square matrix with optional row/column grid descriptors."""

    matrix: np.ndarray
    hermitian: bool = False
    rows: dict | None = None
    cols: dict | None = None
    tol: float = 1e-12

    def __post_init__(self):
        m = np.array(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractViolation(f"operator must be square, got shape {m.shape}")
        for desc in (self.rows, self.cols):
            if desc is not None and desc.get("n", m.shape[0]) != m.shape[0]:
                raise ContractViolation("grid descriptor does not match operator dimension")
        if self.hermitian:
            scale = max(1.0, float(np.max(np.abs(m))))
            dev = float(np.max(np.abs(m - m.conj().T)))
            if dev > self.tol * scale:
                raise ContractViolation(f"operator flagged Hermitian but max|A-A^H| = {dev:.3e}")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def symmetric_eigensolve(op: DenseOperator) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of a Hermitian operator."""
    if not op.hermitian:
        raise ContractViolation("symmetric_eigensolve requires an operator flagged Hermitian")
    a = op.matrix
    a = 0.5 * (a + a.conj().T)
    vals, vecs = scipy.linalg.eigh(a)
    return vals, vecs


def graded_eigensolve(diag, rest) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of diag(d) + rest with eigenvalues refined by Rayleigh quotients.

    For strongly graded d (mapped momentum grids reach 1e6 MeV) eigh has absolute error
    eps*|d|_max in every eigenvalue; summing d v^2 and v.rest.v separately restores
    relative accuracy for the low states (the quotient error is quadratic in the vector error).
    """
    d = np.asarray(diag, dtype=float)
    r = np.asarray(rest, dtype=float)
    _, vecs = symmetric_eigensolve(DenseOperator(np.diag(d) + r, hermitian=True))
    vals = d @ (vecs * vecs) + np.einsum("ij,ij->j", vecs, r @ vecs)
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def largest_eigenvalue(
    op: DenseOperator | np.ndarray,
    which: str = "magnitude",
    method: str = "dense",
    max_iter: int = 10_000,
    tol: float = 1e-12,
    residual_tol: float = 1e-8,
) -> tuple[complex | float, np.ndarray]:
    """Dominant eigenpair of a square, possibly non-symmetric operator.

    ``which='magnitude'`` selects max |lambda|; ``which='real'`` selects the
    eigenvalue with the largest real part (used by the Faddeev search, where
    spurious components can have large negative eigenvalues).
    ``method='power'`` runs a plain power iteration (magnitude only) and raises
    :class:`NumericalError` with the iteration count when it stalls.
    ``method='arnoldi'`` uses ARPACK with a fixed start vector, for large kernels.
    """
    a = op.matrix if isinstance(op, DenseOperator) else np.asarray(op)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation("operator must be square")
    if which not in ("magnitude", "real"):
        raise ParameterError(f"unknown selection {which!r}")

    if method == "power":
        if which != "magnitude":
            raise ParameterError("power iteration only resolves the magnitude-dominant eigenvalue")
        x = np.ones(a.shape[0], dtype=complex) / np.sqrt(a.shape[0])
        lam = 0.0
        for it in range(1, max_iter + 1):
            y = a @ x
            lam = np.vdot(x, y)
            r = np.linalg.norm(y - lam * x)
            if r < tol * max(1.0, abs(lam)):
                return _real_if_close(lam), _real_if_close(x)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                return 0.0, _real_if_close(x)
            x = y / ny
        raise NumericalError(f"power iteration did not converge after {max_iter} iterations", iterations=max_iter)

    if method == "arnoldi":
        n = a.shape[0]
        v0 = np.ones(n) / np.sqrt(n)
        try:
            vals, vecs = scipy.sparse.linalg.eigs(
                a, k=1, which="LR" if which == "real" else "LM", v0=v0, tol=tol, maxiter=max_iter, ncv=min(n, 40)
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise NumericalError("Arnoldi iteration did not converge", iterations=max_iter) from exc
    elif method == "dense":
        vals, vecs = scipy.linalg.eig(a)
    else:
        raise ParameterError(f"unknown method {method!r}")
    key = np.abs(vals) if which == "magnitude" else vals.real
    # ties broken by the larger real part, then index, so the result is deterministic
    order = np.lexsort((-np.arange(len(vals)), vals.real, key))
    i = order[-1]
    lam, v = vals[i], vecs[:, i]
    v = v / np.linalg.norm(v)
    # fix the global phase: largest component real positive
    j = int(np.argmax(np.abs(v)))
    v = v * (abs(v[j]) / v[j])
    res = np.linalg.norm(a @ v - lam * v)
    if res > residual_tol * max(1.0, abs(lam)):
        raise NumericalError(f"eigenvector residual {res:.3e} exceeds {residual_tol:.1e}")
    return _real_if_close(lam), _real_if_close(v)


def _real_if_close(z):
    arr = np.asarray(z)
    if np.iscomplexobj(arr) and np.all(np.abs(arr.imag) <= 1e-13 * max(1.0, float(np.max(np.abs(arr))))):
        arr = arr.real
    return arr.item() if arr.ndim == 0 else arr
