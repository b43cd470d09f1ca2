"""Linear algebra over GF(2) for homotopy witnesses ``Psi Phi + G F = id + R d + d R``.

Matrices are tuples of Python ints, one per row, with bit ``j`` of row ``i``
holding entry ``(i, j)``.  Row operations are single XORs, which keeps the
fuzz campaigns fast without any numeric dependency.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

MAX_GENERATOR_DIM = 16
GENERATOR_ATTEMPTS = 256


class GF2Error(ValueError):
    pass


class ShapeMismatch(GF2Error):
    pass


class NotAComplex(GF2Error):
    pass


class InvalidWitness(GF2Error):
    pass


class InclusionFailure(RuntimeError):
    """A kernel vector of ``Phi`` restricted to cycles is not hit by ``d R``."""


class GenerationExhausted(RuntimeError):
    pass


def _popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass(frozen=True)
class GF2Matrix:
    rows: int
    cols: int
    data: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.rows < 0 or self.cols < 0:
            raise ShapeMismatch("negative dimension")
        data = tuple(int(r) for r in self.data)
        if len(data) != self.rows:
            raise ShapeMismatch(f"expected {self.rows} rows, got {len(data)}")
        limit = 1 << self.cols
        if any(r < 0 or r >= limit for r in data):
            raise ShapeMismatch(f"row bits beyond column count {self.cols}")
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "GF2Matrix":
        return cls(rows, cols, (0,) * rows)

    @classmethod
    def identity(cls, n: int) -> "GF2Matrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def from_dense(cls, dense: Sequence[Sequence[int]], cols: Optional[int] = None) -> "GF2Matrix":
        arr = [list(r) for r in dense]
        if cols is None:
            cols = len(arr[0]) if arr else 0
        data = []
        for r in arr:
            if len(r) != cols:
                raise ShapeMismatch("ragged matrix")
            bits = 0
            for j, v in enumerate(r):
                if v not in (0, 1):
                    raise GF2Error(f"entry {v!r} is not 0 or 1")
                bits |= int(v) << j
            data.append(bits)
        return cls(len(arr), cols, tuple(data))

    @classmethod
    def random(cls, rng: np.random.Generator, rows: int, cols: int) -> "GF2Matrix":
        data = tuple(int(rng.integers(0, 1 << cols)) if cols else 0 for _ in range(rows))
        return cls(rows, cols, data)

    def to_dense(self) -> list[list[int]]:
        return [[(r >> j) & 1 for j in range(self.cols)] for r in self.data]

    def to_numpy(self) -> np.ndarray:
        return np.array(self.to_dense(), dtype=np.uint8).reshape(self.rows, self.cols)

    def entry(self, i: int, j: int) -> int:
        return (self.data[i] >> j) & 1

    def flip(self, i: int, j: int) -> "GF2Matrix":
        data = list(self.data)
        data[i] ^= 1 << j
        return GF2Matrix(self.rows, self.cols, tuple(data))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def is_zero(self) -> bool:
        return not any(self.data)

    def __add__(self, other: "GF2Matrix") -> "GF2Matrix":
        if self.shape != other.shape:
            raise ShapeMismatch(f"{self.shape} + {other.shape}")
        return GF2Matrix(self.rows, self.cols, tuple(a ^ b for a, b in zip(self.data, other.data)))

    def __matmul__(self, other: "GF2Matrix") -> "GF2Matrix":
        if self.cols != other.rows:
            raise ShapeMismatch(f"{self.shape} @ {other.shape}")
        out = []
        for row in self.data:
            acc = 0
            j = 0
            while row:
                if row & 1:
                    acc ^= other.data[j]
                row >>= 1
                j += 1
            out.append(acc)
        return GF2Matrix(self.rows, other.cols, tuple(out))

    def apply(self, v: int) -> int:
        """Image of the column vector with bitmask ``v``, as a bitmask over rows."""
        out = 0
        for i, row in enumerate(self.data):
            out |= (_popcount(row & v) & 1) << i
        return out

    def transpose(self) -> "GF2Matrix":
        out = [0] * self.cols
        for i, row in enumerate(self.data):
            j = 0
            while row:
                if row & 1:
                    out[j] |= 1 << i
                row >>= 1
                j += 1
        return GF2Matrix(self.cols, self.rows, tuple(out))

    @property
    def T(self) -> "GF2Matrix":
        return self.transpose()


def vstack(*mats: GF2Matrix) -> GF2Matrix:
    cols = mats[0].cols
    if any(m.cols != cols for m in mats):
        raise ShapeMismatch("vstack needs equal column counts")
    return GF2Matrix(sum(m.rows for m in mats), cols, tuple(r for m in mats for r in m.data))


def hstack(*mats: GF2Matrix) -> GF2Matrix:
    rows = mats[0].rows
    if any(m.rows != rows for m in mats):
        raise ShapeMismatch("hstack needs equal row counts")
    data = []
    for i in range(rows):
        bits, shift = 0, 0
        for m in mats:
            bits |= m.data[i] << shift
            shift += m.cols
        data.append(bits)
    return GF2Matrix(rows, sum(m.cols for m in mats), tuple(data))


def _row_basis(rows: Iterable[int]) -> dict[int, int]:
    """Echelon basis keyed by leading (highest) bit."""
    basis: dict[int, int] = {}
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top not in basis:
                basis[top] = r
                break
            r ^= basis[top]
    return basis


def rank(m: GF2Matrix) -> int:
    return len(_row_basis(m.data))


def _rref(rows: list[int], ncols: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form over the low ``ncols`` bits; returns (rows, pivot columns)."""
    rows = list(rows)
    pivots = []
    r = 0
    for c in range(ncols):
        bit = 1 << c
        sel = next((i for i in range(r, len(rows)) if rows[i] & bit), None)
        if sel is None:
            continue
        rows[r], rows[sel] = rows[sel], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i] & bit:
                rows[i] ^= rows[r]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def null_space(m: GF2Matrix) -> list[int]:
    """Basis of ``{v : m v = 0}`` as column bitmasks."""
    rows, pivots = _rref(list(m.data), m.cols)
    pivot_set = set(pivots)
    basis = []
    for free in range(m.cols):
        if free in pivot_set:
            continue
        v = 1 << free
        for i, p in enumerate(pivots):
            if (rows[i] >> free) & 1:
                v |= 1 << p
        basis.append(v)
    return basis


def solve(a: GF2Matrix, b: GF2Matrix) -> Optional[GF2Matrix]:
    """Some ``X`` with ``a X = b``, or None if the system is inconsistent."""
    if a.rows != b.rows:
        raise ShapeMismatch(f"solve: {a.shape} vs {b.shape}")
    n = a.cols
    aug = [ra | (rb << n) for ra, rb in zip(a.data, b.data)]
    rows, pivots = _rref(aug, n)
    for row in rows[len(pivots) :]:
        if row >> n:
            return None
    x = [0] * n
    for i, p in enumerate(pivots):
        x[p] = rows[i] >> n
    return GF2Matrix(n, b.cols, tuple(x))


def inverse(m: GF2Matrix) -> GF2Matrix:
    if m.rows != m.cols:
        raise ShapeMismatch("inverse of a non-square matrix")
    x = solve(m, GF2Matrix.identity(m.rows))
    if x is None or rank(m) != m.rows:
        raise GF2Error("matrix is singular")
    return x


def homology_dim(boundary: GF2Matrix) -> int:
    """``dim ker d - dim im d`` for a square differential with ``d^2 = 0``."""
    if boundary.rows != boundary.cols:
        raise ShapeMismatch("boundary must be square")
    if not (boundary @ boundary).is_zero():
        raise NotAComplex("boundary does not square to zero")
    r = rank(boundary)
    return boundary.rows - 2 * r


@dataclass(frozen=True)
class HomotopyWitness:
    """``Phi: V -> W``, ``Psi: W -> V``, ``F: V -> X``, ``G: X -> V``, ``R: V -> V`` and the differential."""

    dimV: int
    dimW: int
    dimX: int
    boundary: GF2Matrix
    phi: GF2Matrix
    psi: GF2Matrix
    f: GF2Matrix
    g: GF2Matrix
    r: GF2Matrix

    def check_shapes(self) -> None:
        v, w, x = self.dimV, self.dimW, self.dimX
        expected = {
            "boundary": (v, v),
            "phi": (w, v),
            "psi": (v, w),
            "f": (x, v),
            "g": (v, x),
            "r": (v, v),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeMismatch(f"{name} has shape {got}, expected {shape}")

    def to_json(self) -> dict:
        out = {"dimV": self.dimV, "dimW": self.dimW, "dimX": self.dimX}
        for name in ("boundary", "phi", "psi", "f", "g", "r"):
            out[name] = getattr(self, name).to_dense()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "HomotopyWitness":
        v, w, x = int(data["dimV"]), int(data["dimW"]), int(data["dimX"])
        cols = {"boundary": v, "phi": v, "psi": w, "f": v, "g": x, "r": v}
        mats = {name: GF2Matrix.from_dense(data[name], cols[name]) for name in cols}
        wit = cls(v, w, x, **mats)
        wit.check_shapes()
        return wit


def _defect(w: HomotopyWitness) -> GF2Matrix:
    """``Psi Phi + G F + id + R d + d R``; zero exactly when the witness identity holds."""
    lhs = w.psi @ w.phi + w.g @ w.f
    rhs = GF2Matrix.identity(w.dimV) + w.r @ w.boundary + w.boundary @ w.r
    return lhs + rhs


def verify_witness(w: HomotopyWitness) -> bool:
    w.check_shapes()
    if not (w.boundary @ w.boundary).is_zero():
        return False
    return _defect(w).is_zero()


def reduce_to_trivial_X(w: HomotopyWitness) -> HomotopyWitness:
    """Absorb ``X`` into ``W``: ``Phi~ = (Phi, F)``, ``Psi~ = Psi + G`` on ``W + X``."""
    if not verify_witness(w):
        raise InvalidWitness("witness identity fails")
    phi = vstack(w.phi, w.f)
    psi = hstack(w.psi, w.g)
    v = w.dimV
    return HomotopyWitness(
        v, w.dimW + w.dimX, 0, w.boundary, phi, psi, GF2Matrix.zeros(0, v), GF2Matrix.zeros(v, 0), w.r
    )


def _bits_to_tuple(v: int, n: int) -> tuple[int, ...]:
    return tuple((v >> i) & 1 for i in range(n))


def kernel_inclusion_check(w: HomotopyWitness) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Pairs ``(v, R v)`` over a basis of ``ker Phi`` among cycles, each with ``d(R v) = v``.

    For a valid witness ``Psi Phi v = v + R d v + d R v`` reduces to ``v = d R v``
    on such ``v``; a failure therefore means the witness was corrupted.
    """
    w.check_shapes()
    if w.dimX != 0:
        raise GF2Error("kernel_inclusion_check needs dimX = 0; reduce the witness first")
    stacked = vstack(w.phi, w.boundary)
    pairs = []
    for v in null_space(stacked):
        p = w.r.apply(v)
        if w.boundary.apply(p) != v:
            raise InclusionFailure(f"cycle {_bits_to_tuple(v, w.dimV)} in ker Phi is not d(R v)")
        pairs.append((_bits_to_tuple(v, w.dimV), _bits_to_tuple(p, w.dimV)))
    return pairs


@dataclass(frozen=True)
class BoundReport:
    homology: int
    bound: int
    holds: bool

    def to_json(self) -> dict:
        return {"homology": self.homology, "bound": self.bound, "holds": self.holds}


def check_bound(w: HomotopyWitness) -> BoundReport:
    if not verify_witness(w):
        raise InvalidWitness("witness identity fails")
    h = homology_dim(w.boundary)
    b = w.dimW + w.dimX
    return BoundReport(h, b, h <= b)


@dataclass(frozen=True)
class FixPointReport:
    sum: int
    real_bound: Fraction
    integer_bound: int

    def to_json(self) -> dict:
        return {
            "sum": self.sum,
            "real_bound": float(self.real_bound),
            "real_bound_exact": str(self.real_bound),
            "integer_bound": self.integer_bound,
        }


FIXPOINT_FACTOR = 5


def fix_point_bound(betti: Sequence[int]) -> FixPointReport:
    """Lower bound on fixed points from the sum of mod-2 Betti numbers divided by five."""
    if any(int(b) != b or b < 0 for b in betti):
        raise GF2Error("Betti numbers must be nonnegative integers")
    total = int(sum(betti))
    real = Fraction(total, FIXPOINT_FACTOR)
    return FixPointReport(total, real, math.ceil(real))


def _random_invertible(rng: np.random.Generator, n: int) -> GF2Matrix:
    while True:
        m = GF2Matrix.random(rng, n, n)
        if rank(m) == n:
            return m


def _structured_rows(rng: np.random.Generator, target: GF2Matrix, k: int) -> GF2Matrix:
    """``k`` random rows whose span contains the row space of ``target``."""
    basis = list(_row_basis(target.data).values())
    filler = GF2Matrix.random(rng, k - len(basis), target.cols)
    mixed = _random_invertible(rng, k)
    return mixed @ GF2Matrix(k, target.cols, tuple(basis) + filler.data)


def generate_instance(
    seed: int,
    dimV: int,
    dimW: int,
    dimX: int,
    boundary_rank: Optional[int] = None,
    contraction: Optional[bool] = None,
) -> HomotopyWitness:
    """Deterministic random witness.

    ``d = P J P^{-1}`` with ``J`` the strictly upper shift pairing ``e_{r+i} -> e_i``.
    ``R`` is uniform, or the chain contraction ``P J^T P^{-1}`` (then
    ``id + R d + d R`` projects onto a homology complement, which lets
    ``dim W + dim X`` drop to the homology).  ``Phi, F`` are resampled until
    ``[Psi | G] (Phi; F) = id + R d + d R`` is solvable.
    """
    for d in (dimV, dimW, dimX):
        if int(d) != d or d < 0 or d > MAX_GENERATOR_DIM:
            raise GF2Error(f"dimensions must be integers in [0, {MAX_GENERATOR_DIM}]")
    rng = np.random.default_rng(seed)
    v = dimV
    if boundary_rank is None:
        boundary_rank = int(rng.integers(0, v // 2 + 1))
    if not 0 <= boundary_rank <= v // 2:
        raise GF2Error(f"boundary_rank must be in [0, {v // 2}]")
    if contraction is None:
        contraction = bool(rng.integers(0, 2))
    p = _random_invertible(rng, v)
    p_inv = inverse(p)
    shift = GF2Matrix(v, v, tuple((1 << (boundary_rank + i)) if i < boundary_rank else 0 for i in range(v)))
    boundary = p @ shift @ p_inv
    if contraction:
        r = p @ shift.T @ p_inv
    else:
        r = GF2Matrix.random(rng, v, v)
    target = GF2Matrix.identity(v) + r @ boundary + boundary @ r
    k = dimW + dimX
    if rank(target) > k:
        raise GenerationExhausted(
            f"id + R d + d R has rank {rank(target)} > dim W + dim X = {k}; raise dim W + dim X"
        )
    for attempt in range(GENERATOR_ATTEMPTS):
        if attempt % 2 == 0:
            stack = GF2Matrix.random(rng, k, v)
        else:
            stack = _structured_rows(rng, target, k)
        if rank(vstack(stack, target)) != rank(stack):
            continue
        sol = solve(stack.T, target.T)
        assert sol is not None
        psi_g = sol.T
        phi = GF2Matrix(dimW, v, stack.data[:dimW])
        f = GF2Matrix(dimX, v, stack.data[dimW:])
        psi = GF2Matrix(v, dimW, tuple(row & ((1 << dimW) - 1) for row in psi_g.data))
        g = GF2Matrix(v, dimX, tuple(row >> dimW for row in psi_g.data))
        return HomotopyWitness(v, dimW, dimX, boundary, phi, psi, f, g, r)
    raise GenerationExhausted(f"no solvable (Phi, F) after {GENERATOR_ATTEMPTS} attempts")


@dataclass
class FuzzReport:
    generated: int = 0
    holds: int = 0
    violations: int = 0
    exhausted: int = 0
    inclusion_pairs: int = 0
    max_dim: int = 12

    def merge(self, other: "FuzzReport") -> None:
        self.generated += other.generated
        self.holds += other.holds
        self.violations += other.violations
        self.exhausted += other.exhausted
        self.inclusion_pairs += other.inclusion_pairs

    def to_json(self) -> dict:
        return {
            "generated": self.generated,
            "holds": self.holds,
            "violations": self.violations,
            "exhausted": self.exhausted,
            "inclusion_pairs": self.inclusion_pairs,
        }


def _instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _fuzz_one(seed: int, index: int, dims: Optional[tuple[int, int, int]], max_dim: int) -> FuzzReport:
    rep = FuzzReport(max_dim=max_dim)
    s = _instance_seed(seed, index)
    if dims is None:
        rng = np.random.default_rng(s)
        v = int(rng.integers(0, max_dim + 1))
        k = int(rng.integers(0, max_dim + 1))
        w = int(rng.integers(0, k + 1))
        dims_i = (v, w, k - w)
    else:
        dims_i = dims
    try:
        wit = generate_instance(s, *dims_i)
    except GenerationExhausted:
        rep.exhausted = 1
        return rep
    if not verify_witness(wit):
        raise InvalidWitness(f"generator produced an invalid witness (seed {s}, dims {dims_i})")
    rep.generated = 1
    b = check_bound(wit)
    rep.holds = int(b.holds)
    rep.violations = int(not b.holds)
    rep.inclusion_pairs = len(kernel_inclusion_check(reduce_to_trivial_X(wit)))
    return rep


def fuzz(
    seed: int,
    count: int,
    dims: Optional[tuple[int, int, int]] = None,
    max_dim: int = 12,
    workers: Optional[int] = None,
    max_tries: Optional[int] = None,
) -> FuzzReport:
    """Generate ``count`` witnesses and check the homology bound on each.

    With ``dims`` unset, each instance draws ``dim V <= max_dim`` and
    ``dim W + dim X <= max_dim``; draws whose target rank is too large are
    counted as ``exhausted`` and replaced until ``count`` witnesses exist.
    """
    if count < 0:
        raise GF2Error("count must be nonnegative")
    if max_tries is None:
        max_tries = 50 * count + 100
    total = FuzzReport(max_dim=max_dim)
    index = 0
    chunk = max(count, 1)
    while total.generated < count and index < max_tries:
        need = min(chunk, max_tries - index)
        idx = range(index, index + need)
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda i: _fuzz_one(seed, i, dims, max_dim), idx))
        else:
            parts = [_fuzz_one(seed, i, dims, max_dim) for i in idx]
        # Keep exactly the first ``count`` generated instances, in index order.
        for part in parts:
            if part.generated and total.generated >= count:
                continue
            total.merge(part)
        index += need
        chunk = max(count - total.generated, 1) * 2
    return total
