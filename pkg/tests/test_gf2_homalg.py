from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rabinowitz_lab.gf2_homalg import (
    GenerationExhausted,
    GF2Error,
    GF2Matrix,
    HomotopyWitness,
    InclusionFailure,
    InvalidWitness,
    NotAComplex,
    ShapeMismatch,
    check_bound,
    fix_point_bound,
    fuzz,
    generate_instance,
    homology_dim,
    hstack,
    inverse,
    kernel_inclusion_check,
    null_space,
    rank,
    reduce_to_trivial_X,
    solve,
    verify_witness,
    vstack,
)


def dense(m: GF2Matrix) -> np.ndarray:
    return m.to_numpy().astype(int)


def all_vectors(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=int).reshape(2**n, n)


def brute_rank(a: np.ndarray) -> int:
    """log2 of the size of the row span, by enumeration of all combinations."""
    rows = a.shape[0]
    span = {tuple((c @ a) % 2) for c in all_vectors(rows)} if rows else {()}
    return len(span).bit_length() - 1


def brute_homology(d: np.ndarray) -> int:
    n = d.shape[0]
    vecs = all_vectors(n)
    images = (vecs @ d.T) % 2
    ker = int(np.sum(~images.any(axis=1)))
    im = len({tuple(r) for r in images})
    return (ker.bit_length() - 1) - (im.bit_length() - 1)


def identity_witness(n: int) -> HomotopyWitness:
    i = GF2Matrix.identity(n)
    z = GF2Matrix.zeros(n, n)
    return HomotopyWitness(n, n, 0, z, i, i, GF2Matrix.zeros(0, n), GF2Matrix.zeros(n, 0), z)


matrices = st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**32 - 1)).map(
    lambda t: GF2Matrix.random(np.random.default_rng(t[2]), t[0], t[1])
)


class TestMatrix:
    def test_rank_examples(self):
        assert rank(GF2Matrix.identity(4)) == 4
        assert rank(GF2Matrix.zeros(3, 5)) == 0
        assert rank(GF2Matrix.from_dense([[1, 1], [1, 1]])) == 1

    @settings(max_examples=100)
    @given(matrices)
    def test_rank_against_enumeration(self, m):
        assert rank(m) == brute_rank(dense(m))
        assert rank(m.T) == rank(m)

    @settings(max_examples=100)
    @given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**32 - 1))
    def test_matmul_against_numpy(self, a, b, c, seed):
        rng = np.random.default_rng(seed)
        x, y = GF2Matrix.random(rng, a, b), GF2Matrix.random(rng, b, c)
        np.testing.assert_array_equal(dense(x @ y), (dense(x) @ dense(y)) % 2)
        np.testing.assert_array_equal(dense(x + x), np.zeros((a, b)))
        np.testing.assert_array_equal(dense(x.T), dense(x).T)

    @settings(max_examples=100)
    @given(matrices)
    def test_null_space(self, m):
        basis = null_space(m)
        assert len(basis) == m.cols - rank(m)
        for v in basis:
            assert m.apply(v) == 0
        assert rank(GF2Matrix(len(basis), m.cols, tuple(basis))) == len(basis)

    @settings(max_examples=100)
    @given(matrices, st.integers(0, 2**32 - 1))
    def test_solve(self, a, seed):
        rng = np.random.default_rng(seed)
        x = GF2Matrix.random(rng, a.cols, 3)
        b = a @ x
        sol = solve(a, b)
        assert sol is not None and a @ sol == b

    def test_solve_inconsistent(self):
        a = GF2Matrix.from_dense([[1, 0], [1, 0]])
        b = GF2Matrix.from_dense([[1], [0]])
        assert solve(a, b) is None

    def test_inverse(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m = GF2Matrix.random(rng, 5, 5)
            if rank(m) == 5:
                assert m @ inverse(m) == GF2Matrix.identity(5)
        with pytest.raises(GF2Error):
            inverse(GF2Matrix.zeros(2, 2))

    def test_stacking_and_shapes(self):
        a = GF2Matrix.from_dense([[1, 0, 1]])
        b = GF2Matrix.from_dense([[0, 1, 1]])
        assert vstack(a, b).to_dense() == [[1, 0, 1], [0, 1, 1]]
        assert hstack(a, b).to_dense() == [[1, 0, 1, 0, 1, 1]]
        with pytest.raises(ShapeMismatch):
            a @ b
        with pytest.raises(GF2Error):
            GF2Matrix.from_dense([[2]])
        with pytest.raises(ShapeMismatch):
            GF2Matrix(1, 2, (4,))


class TestHomology:
    def test_examples(self):
        assert homology_dim(GF2Matrix.zeros(5, 5)) == 5
        d = GF2Matrix.from_dense([[0, 1], [0, 0]])
        assert homology_dim(d) == 0
        d4 = GF2Matrix.from_dense([[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 1], [0, 0, 0, 0]])
        assert homology_dim(d4) == 0 == brute_homology(dense(d4))

    def test_not_a_complex(self):
        with pytest.raises(NotAComplex):
            homology_dim(GF2Matrix.identity(2))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 5), st.integers(0, 2**32 - 1))
    def test_against_enumeration(self, n, seed):
        w = generate_instance(seed, n, n, 0, contraction=False)
        assert homology_dim(w.boundary) == brute_homology(dense(w.boundary))


class TestWitness:
    def test_identity(self):
        w = identity_witness(3)
        assert verify_witness(w)
        assert kernel_inclusion_check(w) == []
        rep = check_bound(w)
        assert (rep.homology, rep.bound, rep.holds) == (3, 3, True)

    def test_flipped_bit(self):
        w = identity_witness(3)
        bad = HomotopyWitness(3, 3, 0, w.boundary, w.phi, w.psi.flip(0, 1), w.f, w.g, w.r)
        assert not verify_witness(bad)
        with pytest.raises(InvalidWitness):
            check_bound(bad)

    def test_everything_through_x(self):
        # d = 0, Phi = 0, R = 0 forces G F = id, so X must carry all of V
        n = 3
        z = GF2Matrix.zeros(n, n)
        w = HomotopyWitness(
            n, 1, n, z, GF2Matrix.zeros(1, n), GF2Matrix.zeros(n, 1), GF2Matrix.identity(n), GF2Matrix.identity(n), z
        )
        assert verify_witness(w)
        rep = check_bound(w)
        assert rep.holds and rep.homology == 3 and rep.bound == 4

    def test_shape_mismatch(self):
        w = identity_witness(2)
        bad = HomotopyWitness(2, 3, 0, w.boundary, w.phi, w.psi, w.f, w.g, w.r)
        with pytest.raises(ShapeMismatch):
            verify_witness(bad)

    def test_json_roundtrip(self):
        w = generate_instance(3, 5, 4, 2)
        assert HomotopyWitness.from_json(w.to_json()) == w


class TestGenerator:
    def test_seed_one(self):
        w = generate_instance(1, 4, 4, 0)
        assert verify_witness(w)

    def test_exhausted(self):
        with pytest.raises(GenerationExhausted):
            generate_instance(1, 6, 0, 0, boundary_rank=0)

    def test_deterministic(self):
        assert generate_instance(42, 7, 5, 3) == generate_instance(42, 7, 5, 3)

    def test_dimension_cap(self):
        with pytest.raises(GF2Error):
            generate_instance(0, 17, 1, 1)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10), st.integers(0, 10), st.integers(0, 4), st.integers(0, 2**32 - 1))
    def test_outputs_verify(self, v, w, x, seed):
        try:
            wit = generate_instance(seed, v, w, x)
        except GenerationExhausted:
            return
        assert verify_witness(wit)
        assert check_bound(wit).holds


class TestProofSteps:
    def test_reduce_shapes(self):
        w = generate_instance(11, 6, 2, 3, boundary_rank=1, contraction=True)
        red = reduce_to_trivial_X(w)
        assert (red.dimW, red.dimX) == (5, 0)
        assert verify_witness(red)

    def test_reduce_trivial_x(self):
        w = generate_instance(4, 5, 5, 0)
        red = reduce_to_trivial_X(w)
        assert red.phi == w.phi and red.psi == w.psi and red.r == w.r

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10), st.integers(0, 8), st.integers(0, 4), st.integers(0, 2**32 - 1))
    def test_reduce_preserves_bound(self, v, w, x, seed):
        try:
            wit = generate_instance(seed, v, w, x)
        except GenerationExhausted:
            return
        red = reduce_to_trivial_X(wit)
        assert verify_witness(red)
        # independent recomputation of the reduced identity
        lhs = red.psi @ red.phi
        rhs = GF2Matrix.identity(v) + red.r @ red.boundary + red.boundary @ red.r
        assert lhs == rhs
        a, b = check_bound(wit), check_bound(red)
        assert (a.homology, a.bound) == (b.homology, b.bound)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 8), st.integers(0, 2**32 - 1))
    def test_inclusion_pairs(self, v, w, seed):
        try:
            wit = reduce_to_trivial_X(generate_instance(seed, v, w, 0))
        except GenerationExhausted:
            return
        d = dense(wit.boundary)
        for vec, pre in kernel_inclusion_check(wit):
            np.testing.assert_array_equal((d @ np.array(pre)) % 2, np.array(vec))

    def test_inclusion_needs_trivial_x(self):
        with pytest.raises(GF2Error):
            kernel_inclusion_check(generate_instance(2, 4, 2, 2, boundary_rank=1, contraction=True))

    def test_corruption_detected(self):
        # find an instance with nonempty ker Phi among cycles, then break the differential
        for seed in range(200):
            try:
                w = generate_instance(seed, 6, 2, 0, boundary_rank=2, contraction=True)
            except GenerationExhausted:
                continue
            if kernel_inclusion_check(w):
                break
        else:
            pytest.fail("no instance with a nontrivial kernel")
        bad = HomotopyWitness(w.dimV, w.dimW, w.dimX, GF2Matrix.zeros(6, 6), w.phi, w.psi, w.f, w.g, w.r)
        with pytest.raises(InclusionFailure):
            kernel_inclusion_check(bad)


class TestFixPoints:
    def test_examples(self):
        rep = fix_point_bound([1, 0, 1])
        assert (rep.sum, rep.real_bound, rep.integer_bound) == (2, Fraction(2, 5), 1)
        assert fix_point_bound([1, 2, 4, 2, 1]).integer_bound == 2
        assert fix_point_bound([]).integer_bound == 0
        assert fix_point_bound([0, 0]).integer_bound == 0

    def test_negative(self):
        with pytest.raises(GF2Error):
            fix_point_bound([1, -1])

    @given(st.lists(st.integers(0, 50), max_size=12))
    def test_ceiling(self, betti):
        rep = fix_point_bound(betti)
        assert 5 * rep.integer_bound >= rep.sum > 5 * (rep.integer_bound - 1)


class TestFuzz:
    def test_small_campaign(self):
        rep = fuzz(seed=0, count=500, max_dim=8)
        assert rep.generated == 500 and rep.violations == 0 and rep.holds == 500

    def test_fixed_dims(self):
        rep = fuzz(seed=1, count=200, dims=(6, 4, 2))
        assert rep.generated == 200 and rep.violations == 0

    def test_deterministic_and_thread_independent(self):
        a = fuzz(seed=9, count=100).to_json()
        b = fuzz(seed=9, count=100, workers=4).to_json()
        assert a == b
