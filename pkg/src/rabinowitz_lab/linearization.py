"""Linearized vortex operator on exponentially weighted spaces.

Along a flow line ``(a_m(s), eta(s))`` the linearization acts on tangent data
``(b_m, eta_hat)`` as ``sigma d/ds + M(s)`` where, in real coordinates
``(Re b_m, Im b_m, ..., eta_hat)``, ``M`` is the symmetric matrix with
diagonal ``-2 pi (m + eta)`` on the mode slots and coupling ``-2 pi a_m``
between each mode and ``eta_hat``.  ``sigma = +1`` gives D (domain allowed
to grow like ``e^{delta |s|}``), ``sigma = -1`` gives its formal adjoint D*
(domain forced to decay like ``e^{-delta |s|}``).

Both are conjugated to plain L2 by the weight ``gamma(s) = exp(delta beta(s) s)``:
``g = gamma^{-sigma} xi`` turns the operator into
``sigma d/ds + delta h'(s) + M(s)`` with ``h = beta(s) s``.

Discretization is rectangular Chebyshev collocation on ``[-S, S]``: unknowns
live on ``Ns`` extrema nodes, equations are imposed at the ``Ns - 1`` interior
first-kind points, and at each end the components along the exponentially
forbidden eigenvectors of the limiting operator are set to zero.  The number
of unknowns minus the number of equations is then the Fredholm index of the
continuous problem, and kernels are read off from weighted SVDs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .fourier_loop import TWO_PI
from .vortex_flow import NotConverged, Trajectory, vector_field

DEFAULT_SVD_TOL = 1e-7
GAP_MARGIN = 100.0
ASYMPTOTIC_S = 1e3


class LinearizationError(RuntimeError):
    pass


class InvalidGrid(ValueError):
    pass


class BandMismatch(ValueError):
    pass


class SpectralGapViolation(LinearizationError):
    """Weighted singular values come too close to the kernel threshold for a clean cut."""


@dataclass(frozen=True)
class WeightedGrid:
    S: float = 8.0
    Ns: int = 400
    band: tuple[int, int] = (-3, 2)
    delta: float = math.pi
    T: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "band", (int(self.band[0]), int(self.band[1])))
        if not (self.S > self.T > 0):
            raise InvalidGrid(f"need S > T > 0, got S={self.S}, T={self.T}")
        if self.Ns < 16:
            raise InvalidGrid(f"need Ns >= 16, got {self.Ns}")
        if not (0.0 < self.delta < TWO_PI):
            raise InvalidGrid(f"delta={self.delta} must lie strictly between 0 and the spectral gap 2 pi")
        if self.band[0] > self.band[1]:
            raise InvalidGrid(f"empty band {self.band}")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.band[0], self.band[1] + 1)

    @property
    def n_fields(self) -> int:
        return 2 * self.modes.size + 1

    def to_json(self) -> dict:
        d = asdict(self)
        d["band"] = list(self.band)
        return d


def _flat(x: np.ndarray) -> np.ndarray:
    xs = np.where(x > 0, x, 1.0)
    return np.where(x > 0, np.exp(-1.0 / xs), 0.0)


def _flat_prime(x: np.ndarray) -> np.ndarray:
    xs = np.where(x > 0, x, 1.0)
    return np.where(x > 0, np.exp(-1.0 / xs) / xs**2, 0.0)


def _transition(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """C-infinity step from 0 (x <= 0) to 1 (x >= 1) and its derivative."""
    f, g = _flat(x), _flat(1.0 - x)
    fp, gp = _flat_prime(x), _flat_prime(1.0 - x)
    den = f + g
    return f / den, (fp * g + f * gp) / den**2


def beta(s, T: float = 1.0):
    """Smooth odd ramp: -1 for s <= -T, +1 for s >= T."""
    x = (np.asarray(s, dtype=float) + T) / (2.0 * T)
    return -1.0 + 2.0 * _transition(x)[0]


def beta_prime(s, T: float = 1.0):
    x = (np.asarray(s, dtype=float) + T) / (2.0 * T)
    return _transition(x)[1] / T


def weight_exponent(s, T: float = 1.0):
    """``h(s) = beta(s) s``; the weight is ``exp(delta h)``."""
    s = np.asarray(s, dtype=float)
    return beta(s, T) * s


def weight_exponent_prime(s, T: float = 1.0):
    s = np.asarray(s, dtype=float)
    return beta_prime(s, T) * s + beta(s, T)


def weight_profile(grid: WeightedGrid, s) -> float | np.ndarray:
    """``exp(delta beta(s) s)``, growing like ``exp(delta |s|)`` at both ends."""
    out = np.exp(grid.delta * weight_exponent(s, grid.T))
    return float(out) if np.ndim(out) == 0 else out


def chebyshev_nodes(n: int) -> np.ndarray:
    """Extrema ``cos(pi j/(n-1))`` in increasing order."""
    return -np.cos(np.pi * np.arange(n) / (n - 1))


def chebyshev_points(n: int) -> np.ndarray:
    """First-kind points ``cos(pi (2j+1)/(2n))`` in increasing order."""
    return -np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))


def chebyshev_diff(x: np.ndarray) -> np.ndarray:
    """Spectral differentiation matrix on the extrema nodes ``x`` (any order of the standard set)."""
    n = x.size
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n))
    d -= np.diag(d.sum(axis=1))
    return d


def barycentric_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Interpolation from Chebyshev extrema ``x`` to points ``y`` disjoint from them."""
    w = (-1.0) ** np.arange(x.size)
    w[0] *= 0.5
    w[-1] *= 0.5
    p = w[None, :] / (y[:, None] - x[None, :])
    return p / p.sum(axis=1, keepdims=True)


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Quadrature weights on ``[-1, 1]`` for the ``n`` Chebyshev extrema."""
    deg = n - 1
    theta = np.pi * np.arange(n) / deg
    w = np.zeros(n)
    v = np.ones(n - 2)
    inner = theta[1:-1]
    if deg % 2 == 0:
        w[0] = w[-1] = 1.0 / (deg**2 - 1)
        for k in range(1, deg // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
        v -= np.cos(deg * inner) / (deg**2 - 1)
    else:
        w[0] = w[-1] = 1.0 / deg**2
        for k in range(1, (deg - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / deg
    return w


def fejer_weights(n: int) -> np.ndarray:
    """Fejer's first rule on the ``n`` first-kind points."""
    theta = np.pi * (2 * np.arange(n) + 1) / (2 * n)
    k = np.arange(1, n // 2 + 1)
    series = np.cos(2 * np.outer(theta, k)) / (4 * k * k - 1)
    return 2.0 / n * (1.0 - 2.0 * series.sum(axis=1))


def _field_vector(state, modes: np.ndarray) -> tuple[np.ndarray, float]:
    """Complex coefficients of ``state`` on ``modes`` and its eta."""
    a = np.zeros(modes.size, dtype=complex)
    coeffs = state.rho * np.exp(1j * state.phases)
    a[state.band_lo - modes[0] : state.band_hi - modes[0] + 1] = coeffs
    return a, state.eta


def hessian_matrix(a: np.ndarray, eta: float, modes: np.ndarray) -> np.ndarray:
    """The symmetric zeroth-order part ``M`` in real coordinates."""
    nm = modes.size
    n = 2 * nm + 1
    mat = np.zeros((n, n))
    diag = -TWO_PI * (modes + eta)
    idx = np.arange(nm)
    mat[2 * idx, 2 * idx] = diag
    mat[2 * idx + 1, 2 * idx + 1] = diag
    mat[2 * idx, -1] = mat[-1, 2 * idx] = -TWO_PI * a.real
    mat[2 * idx + 1, -1] = mat[-1, 2 * idx + 1] = -TWO_PI * a.imag
    return mat


@dataclass(frozen=True, eq=False)
class _Block:
    fields: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    matrix: np.ndarray
    row_weights: np.ndarray
    col_weights: np.ndarray


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Discretized ``sigma d/ds + delta h' + M`` on conjugated (L2) unknowns.

    Column ``j * n_fields + f`` is field ``f`` at node ``nodes[j]``; row
    ``k * n_fields + f`` is equation ``f`` at ``points[k]``; the trailing
    ``n_bc`` rows are the boundary projections.  Field ``2i``/``2i+1`` are
    the real/imaginary parts of mode ``modes[i]`` and the last field is eta.
    """

    grid: WeightedGrid
    sigma: int
    nodes: np.ndarray
    points: np.ndarray
    n_bc: int
    blocks: tuple[_Block, ...]
    row_weights: np.ndarray
    col_weights: np.ndarray
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def modes(self) -> np.ndarray:
        return self.grid.modes

    @property
    def n_fields(self) -> int:
        return self.grid.n_fields

    @property
    def shape_index(self) -> int:
        return self.shape[1] - self.shape[0]

    def field_index(self, mode: Optional[int] = None, part: str = "re") -> int:
        """Field slot of ``Re``/``Im`` of a mode, or of eta when ``mode`` is None."""
        if mode is None:
            return self.n_fields - 1
        i = int(mode) - self.grid.band[0]
        if not 0 <= i < self.modes.size:
            raise BandMismatch(f"mode {mode} outside {self.grid.band}")
        return 2 * i + (0 if part == "re" else 1)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def conjugate(self, values: np.ndarray) -> np.ndarray:
        """Map samples ``xi`` of shape ``(Ns, n_fields)`` to the L2 unknowns ``g = gamma^{-sigma} xi``."""
        w = np.exp(-self.sigma * self.grid.delta * weight_exponent(self.nodes, self.grid.T))
        return (np.asarray(values, dtype=float) * w[:, None]).ravel()

    def conjugate_points(self, values: np.ndarray) -> np.ndarray:
        """Same conjugation for samples at the equation points."""
        w = np.exp(-self.sigma * self.grid.delta * weight_exponent(self.points, self.grid.T))
        return (np.asarray(values, dtype=float) * w[:, None]).ravel()

    def interior(self, y: np.ndarray) -> np.ndarray:
        """Interior equation values of an output vector, shape ``(Ns - 1, n_fields)``."""
        return np.asarray(y)[: self.points.size * self.n_fields].reshape(self.points.size, self.n_fields)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def inner_domain(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(self.col_weights * x * y))

    def inner_range(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.sum(self.row_weights * x * y))

    @cached_property
    def _spectra(self) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        for b in self.blocks:
            aw = np.sqrt(b.row_weights)[:, None] * b.matrix / np.sqrt(b.col_weights)[None, :]
            _, sv, vt = scipy.linalg.svd(aw, full_matrices=True)
            padded = np.zeros(b.cols.size)
            padded[: sv.size] = sv
            out.append((padded, vt))
        return out

    def singular_values(self) -> np.ndarray:
        """Singular values of ``W_rows^{1/2} A W_cols^{-1/2}``, padded with zeros to the column count."""
        return np.sort(np.concatenate([sv for sv, _ in self._spectra]))[::-1]

    def norm(self) -> float:
        return float(self.singular_values()[0])


def _interior_coupling(mats: np.ndarray) -> np.ndarray:
    pattern = np.any(mats != 0.0, axis=0)
    return pattern | pattern.T


def _assemble(traj: Trajectory, grid: WeightedGrid, sigma: int) -> OperatorMatrix:
    if not (traj.neg_converged and traj.pos_converged):
        raise NotConverged("the linearization needs a trajectory converged at both ends")
    lo, hi = grid.band
    if traj.band_lo < lo or traj.band_hi > hi:
        raise BandMismatch(f"grid band {grid.band} does not contain trajectory band {traj.band}")
    modes = grid.modes
    n = grid.n_fields
    N = grid.Ns
    S = grid.S
    x = chebyshev_nodes(N)
    y = chebyshev_points(N - 1)
    nodes, points = S * x, S * y
    d1 = barycentric_matrix(x, y) @ chebyshev_diff(x) / S
    interp = barycentric_matrix(x, y)
    hp = grid.delta * weight_exponent_prime(points, grid.T)

    mats = np.empty((N - 1, n, n))
    for k, s in enumerate(points):
        a, eta = _field_vector(traj.state_at(float(s)), modes)
        mats[k] = hessian_matrix(a, eta, modes)
        mats[k].flat[:: n + 1] += hp[k]
    a_neg, eta_neg = _field_vector(traj.state_at(-ASYMPTOTIC_S), modes)
    a_pos, eta_pos = _field_vector(traj.state_at(ASYMPTOTIC_S), modes)
    k_neg = -(hessian_matrix(a_neg, eta_neg, modes) - grid.delta * np.eye(n))
    k_pos = -(hessian_matrix(a_pos, eta_pos, modes) + grid.delta * np.eye(n))

    coupling = _interior_coupling(mats) | (k_neg != 0) | (k_pos != 0)
    n_comp, labels = connected_components(sp.csr_matrix(coupling), directed=False)

    qn = S * clenshaw_curtis_weights(N)
    qp = S * fejer_weights(N - 1)
    n_interior = (N - 1) * n
    blocks = []
    bc_rows_global = n_interior
    for c in range(n_comp):
        fields = np.flatnonzero(labels == c)
        nf = fields.size
        interior = np.kron(sigma * d1, np.eye(nf))
        sub = mats[:, fields][:, :, fields]
        for i in range(nf):
            for j in range(nf):
                coef = sub[:, i, j]
                if np.any(coef != 0.0):
                    interior[i::nf, j::nf] += coef[:, None] * interp
        lam_n, vec_n = np.linalg.eigh(k_neg[np.ix_(fields, fields)])
        lam_p, vec_p = np.linalg.eigh(k_pos[np.ix_(fields, fields)])
        if np.any(np.abs(lam_n) < 1e-9) or np.any(np.abs(lam_p) < 1e-9):
            raise SpectralGapViolation("weight exponent hits an asymptotic eigenvalue")
        # Forbidden directions: growing toward -inf / +inf in the conjugated variable.
        bc_neg = vec_n[:, sigma * lam_n < 0].T
        bc_pos = vec_p[:, sigma * lam_p > 0].T
        rows_bc = np.zeros((bc_neg.shape[0] + bc_pos.shape[0], N * nf))
        rows_bc[: bc_neg.shape[0], :nf] = bc_neg
        rows_bc[bc_neg.shape[0] :, (N - 1) * nf :] = bc_pos
        mat = np.vstack([interior, rows_bc])
        row_ids = np.concatenate(
            [(np.arange(N - 1)[:, None] * n + fields[None, :]).ravel(), bc_rows_global + np.arange(rows_bc.shape[0])]
        )
        bc_rows_global += rows_bc.shape[0]
        col_ids = (np.arange(N)[:, None] * n + fields[None, :]).ravel()
        row_w = np.concatenate([np.repeat(qp, nf), np.ones(rows_bc.shape[0])])
        col_w = np.repeat(qn, nf)
        blocks.append(_Block(fields, row_ids, col_ids, mat, row_w, col_w))

    n_rows = bc_rows_global
    coo_r, coo_c, coo_v = [], [], []
    row_weights = np.empty(n_rows)
    col_weights = np.empty(N * n)
    for b in blocks:
        r, c = np.nonzero(b.matrix)
        coo_r.append(b.rows[r])
        coo_c.append(b.cols[c])
        coo_v.append(b.matrix[r, c])
        row_weights[b.rows] = b.row_weights
        col_weights[b.cols] = b.col_weights
    matrix = sp.csr_matrix(
        (np.concatenate(coo_v), (np.concatenate(coo_r), np.concatenate(coo_c))), shape=(n_rows, N * n)
    )
    return OperatorMatrix(
        grid, sigma, nodes, points, n_rows - n_interior, tuple(blocks), row_weights, col_weights, matrix
    )


def assemble_D(traj: Trajectory, grid: WeightedGrid = WeightedGrid()) -> OperatorMatrix:
    """Linearized vortex operator from the growth-allowing weighted space."""
    return _assemble(traj, grid, +1)


def assemble_Dstar(traj: Trajectory, grid: WeightedGrid = WeightedGrid()) -> OperatorMatrix:
    """Formal adjoint ``-d/ds + M`` on the decaying weighted space, discretized independently of D."""
    return _assemble(traj, grid, -1)


def _check_gap(op: OperatorMatrix, svd_tol: float) -> None:
    sv = op.singular_values()
    top = sv[0]
    rel = sv / top
    near = (rel > svd_tol / GAP_MARGIN) & (rel < svd_tol * GAP_MARGIN)
    if np.any(near):
        raise SpectralGapViolation(
            f"{int(near.sum())} singular values within a factor {GAP_MARGIN:g} of svd_tol={svd_tol:g}; no clean cut"
        )


def kernel_basis(op: OperatorMatrix, svd_tol: float = DEFAULT_SVD_TOL) -> list[np.ndarray]:
    """Right singular vectors (weighted, mapped back to grid coordinates) below ``svd_tol * sigma_max``."""
    if svd_tol <= 0:
        raise ValueError("svd_tol must be positive")
    cut = svd_tol * op.norm()
    out = []
    for b, (sv, vt) in zip(op.blocks, op._spectra):
        for i in np.flatnonzero(sv < cut):
            v = np.zeros(op.shape[1])
            v[b.cols] = vt[i] / np.sqrt(b.col_weights)
            out.append(v)
    return out


def kernel_dim(op: OperatorMatrix, svd_tol: float = DEFAULT_SVD_TOL) -> int:
    _check_gap(op, svd_tol)
    return int(np.sum(op.singular_values() < svd_tol * op.norm()))


def fredholm_index(traj: Trajectory, grid: WeightedGrid = WeightedGrid(), svd_tol: float = DEFAULT_SVD_TOL) -> int:
    """``dim ker D - dim ker D*`` from two independent weighted SVDs."""
    return fredholm_report(traj, grid, svd_tol)["index"]


def fredholm_report(
    traj: Trajectory, grid: WeightedGrid = WeightedGrid(), svd_tol: float = DEFAULT_SVD_TOL, head: int = 8
) -> dict:
    d = assemble_D(traj, grid)
    ds = assemble_Dstar(traj, grid)
    ker = kernel_dim(d, svd_tol)
    coker = kernel_dim(ds, svd_tol)
    sv = d.singular_values()
    sv_star = ds.singular_values()
    return {
        "index": ker - coker,
        "dim_ker": ker,
        "dim_coker": coker,
        "shape_index": d.shape_index,
        "singular_values_head": [float(v) for v in sv[::-1][:head]],
        "adjoint_singular_values_head": [float(v) for v in sv_star[::-1][:head]],
        "sigma_max": float(sv[0]),
        "grid": grid.to_json(),
    }


def symmetry_generators(traj: Trajectory, op: OperatorMatrix) -> dict[str, np.ndarray]:
    """Conjugated grid vectors of the time-shift and the two rotation generators along ``traj``."""
    modes = op.modes
    n = op.n_fields
    vals = {name: np.zeros((op.nodes.size, n)) for name in ("time_shift", "target_rotation", "domain_rotation")}
    for j, s in enumerate(op.nodes):
        st = traj.state_at(float(s))
        a, _ = _field_vector(st, modes)
        der = vector_field(st)
        dot = np.zeros(modes.size, dtype=complex)
        dot[st.band_lo - modes[0] : st.band_hi - modes[0] + 1] = der.rho * np.exp(1j * st.phases)
        for name, b, eta_part in (
            ("time_shift", dot, der.eta),
            ("target_rotation", -1j * TWO_PI * a, 0.0),
            ("domain_rotation", 1j * TWO_PI * modes * a, 0.0),
        ):
            vals[name][j, 0:-1:2] = b.real
            vals[name][j, 1:-1:2] = b.imag
            vals[name][j, -1] = eta_part
    return {name: op.conjugate(v) for name, v in vals.items()}


def kernel_principal_angles(op: OperatorMatrix, vectors: list[np.ndarray], svd_tol: float = DEFAULT_SVD_TOL) -> np.ndarray:
    """Principal angles (weighted inner product) between ``span(vectors)`` and the numerical kernel."""
    sw = np.sqrt(op.col_weights)
    basis = np.column_stack([sw * v for v in kernel_basis(op, svd_tol)])
    target = np.column_stack([sw * v for v in vectors])
    return scipy.linalg.subspace_angles(basis, target)
