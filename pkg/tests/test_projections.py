"""Projectors, distortions and principal angles."""

import math

import numpy as np
import pytest
import scipy.stats

from mfldproj import (
    DistortionSummary,
    NumericalBreakdown,
    PairPolicy,
    Projector,
    SubspaceBasis,
    jl_point_bound,
    pointset_distortion,
    principal_angles,
    random_subspace,
    sample_projector,
    subspace_distortion,
    vector_distortion,
    weyl_gap,
)


class TestSampleProjector:
    def test_orthonormal_rows(self):
        for N, M in [(50, 1), (100, 40), (64, 64)]:
            A = sample_projector(N, M, 3)
            assert np.abs(A.rows @ A.rows.T - np.eye(M)).max() < 1e-10

    def test_deterministic(self):
        a = sample_projector(80, 11, 42)
        b = sample_projector(80, 11, 42)
        assert a.rows.tobytes() == b.rows.tobytes()
        c = sample_projector(80, 11, 43)
        assert c.rows.tobytes() != a.rows.tobytes()

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            sample_projector(10, 11, 0)
        with pytest.raises(ValueError):
            sample_projector(10, 0, 0)

    def test_projected_norm_unbiased(self):
        # For a fixed unit u, ||Au||^2 is Beta(M/2, (N-M)/2) with mean M/N,
        # so (N/M)||Au||^2 has mean 1 and known variance (the oracle).
        N, M, draws = 200, 20, 2000
        u = np.zeros(N)
        u[0] = 1.0
        vals = np.array([
            (N / M) * float(np.sum((sample_projector(N, M, 1000 + i).rows @ u) ** 2))
            for i in range(draws)
        ])
        a, b = M / 2.0, (N - M) / 2.0
        var_beta = a * b / ((a + b) ** 2 * (a + b + 1))
        se = (N / M) * math.sqrt(var_beta / draws)
        assert abs(vals.mean() - 1.0) < 3 * se


class TestVectorDistortion:
    def test_full_projection_preserves_norms(self):
        A = sample_projector(40, 40, 0)
        rng = np.random.default_rng(1)
        for _ in range(5):
            u = rng.standard_normal(40)
            assert vector_distortion(A, u) < 1e-12

    def test_scale_invariance(self):
        A = sample_projector(100, 10, 0)
        u = np.random.default_rng(2).standard_normal(100)
        assert abs(vector_distortion(A, 3.0 * u) - vector_distortion(A, u)) < 1e-12

    def test_matches_naive_oracle(self):
        A = sample_projector(1000, 100, 7)
        u = np.random.default_rng(3).standard_normal(1000)
        # independent route: explicit dot products and fsum accumulation
        proj = [math.fsum(A.rows[m, i] * u[i] for i in range(1000)) for m in range(100)]
        naive = abs(
            math.sqrt(1000 / 100) * math.sqrt(math.fsum(p * p for p in proj))
            / math.sqrt(math.fsum(x * x for x in u))
            - 1.0
        )
        assert vector_distortion(A, u) == pytest.approx(naive, abs=1e-12)

    def test_zero_vector(self):
        A = sample_projector(10, 2, 0)
        with pytest.raises(ValueError):
            vector_distortion(A, np.zeros(10))

    def test_rotation_invariance_ks(self):
        # the distortion law of a fixed direction is rotation invariant
        N, M, draws = 100, 10, 2000
        rng = np.random.default_rng(5)
        u = rng.standard_normal(N)
        R = np.linalg.qr(rng.standard_normal((N, N)))[0]
        d1 = np.array([vector_distortion(sample_projector(N, M, i), u) for i in range(draws)])
        d2 = np.array([
            vector_distortion(sample_projector(N, M, 10_000 + i), R @ u) for i in range(draws)
        ])
        assert scipy.stats.ks_2samp(d1, d2).pvalue > 0.05

    def test_tail_below_jl_bound(self):
        # By rotation invariance, distortion over random unit directions
        # under one fixed A has the same law as over random A at fixed u.
        N, trials = 500, 10_000
        rng = np.random.default_rng(11)
        for M in (50, 100):
            A = sample_projector(N, M, M)
            U = rng.standard_normal((trials, N))
            proj = np.linalg.norm(U @ A.rows.T, axis=1)
            dist = np.abs(math.sqrt(N / M) * proj / np.linalg.norm(U, axis=1) - 1.0)
            for eps in (0.1, 0.2, 0.3):
                bound = jl_point_bound(eps, M, mode="full")
                rate = float(np.mean(dist > eps))
                sigma = math.sqrt(bound * (1 - bound) / trials)
                assert rate <= bound + 3 * sigma


class TestPointsetDistortion:
    def test_two_points_equal_vector(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((2, 60))
        A = sample_projector(60, 6, 1)
        got = pointset_distortion(A, X)
        assert got.max == pytest.approx(vector_distortion(A, X[0] - X[1]), abs=1e-12)
        assert got.n_evaluated == 1

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((64, 50))
        A = sample_projector(50, 8, 2)
        oracle = max(
            vector_distortion(A, X[i] - X[j]) for i in range(64) for j in range(i + 1, 64)
        )
        got = pointset_distortion(A, X)
        assert got.max == pytest.approx(oracle, rel=1e-12)
        i, j = got.argmax
        assert vector_distortion(A, X[i] - X[j]) == pytest.approx(got.max, rel=1e-12)

    def test_adding_point_never_decreases(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((65, 30))
        A = sample_projector(30, 5, 3)
        m64 = pointset_distortion(A, X[:64]).max
        m65 = pointset_distortion(A, X).max
        assert m65 >= m64

    def test_block_size_independent(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((100, 40))
        A = sample_projector(40, 10, 4)
        a = pointset_distortion(A, X, block=7).max
        b = pointset_distortion(A, X, block=1024).max
        assert a == pytest.approx(b, rel=1e-12)

    def test_keep_samples(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((20, 25))
        A = sample_projector(25, 5, 5)
        got = pointset_distortion(A, X, keep_samples=True)
        assert len(got.samples) == 20 * 19 // 2
        assert got.samples.max() == got.max

    def test_subsample_policy(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((200, 30))
        A = sample_projector(30, 6, 6)
        pol = PairPolicy.subsample(500, seed=77)
        a = pointset_distortion(A, X, pair_policy=pol)
        b = pointset_distortion(A, X, pair_policy=pol)
        assert a.max == b.max
        assert a.policy == pol
        assert a.n_evaluated == 500
        assert a.max <= pointset_distortion(A, X).max + 1e-15

    def test_coincident_points_skipped(self):
        X = np.zeros((3, 10))
        X[2, 0] = 1.0
        A = sample_projector(10, 2, 1)
        got = pointset_distortion(A, X)
        assert got.n_evaluated == 2  # the (0,1) zero chord is skipped

    def test_needs_two_points(self):
        A = sample_projector(10, 2, 1)
        with pytest.raises(ValueError):
            pointset_distortion(A, np.zeros((1, 10)))

    def test_summary_invariant(self):
        with pytest.raises(ValueError):
            DistortionSummary(max=0.5, argmax=(0, 1), n_evaluated=2, samples=np.array([0.1, 0.2]))


class TestSubspaceDistortion:
    def test_full_projection(self):
        A = sample_projector(30, 30, 2)
        U = random_subspace(30, 4, 3)
        assert subspace_distortion(A, U) < 1e-10

    def test_dominates_sphere_sampling(self):
        N, K, M = 50, 3, 10
        A = sample_projector(N, M, 4)
        U = random_subspace(N, K, 5)
        rng = np.random.default_rng(6)
        s = rng.standard_normal((100_000, K))
        s /= np.linalg.norm(s, axis=1, keepdims=True)
        vecs = s @ U.cols.T
        dist = np.abs(math.sqrt(N / M) * np.linalg.norm(vecs @ A.rows.T, axis=1) - 1.0)
        exact = subspace_distortion(A, U)
        gap_small = exact - float(dist[:1000].max())
        gap_large = exact - float(dist.max())
        assert gap_large >= -1e-12
        assert gap_large <= gap_small
        assert gap_large < 0.01

    def test_basis_invariance(self):
        N, K, M = 40, 5, 12
        A = sample_projector(N, M, 7)
        U = random_subspace(N, K, 8)
        Q = np.linalg.qr(np.random.default_rng(9).standard_normal((K, K)))[0]
        U2 = SubspaceBasis(cols=U.cols @ Q)
        assert abs(subspace_distortion(A, U) - subspace_distortion(A, U2)) < 1e-10

    def test_requires_K_le_M(self):
        A = sample_projector(30, 3, 2)
        U = random_subspace(30, 4, 3)
        with pytest.raises(ValueError):
            subspace_distortion(A, U)

    def test_rank_deficient_rejected(self):
        cols = np.zeros((10, 2))
        cols[:, 0] = cols[:, 1] = 1.0 / math.sqrt(10)
        with pytest.raises(ValueError):
            SubspaceBasis(cols=cols)


class TestPrincipalAngles:
    def test_identical(self):
        U = random_subspace(30, 4, 1)
        assert np.allclose(principal_angles(U, U).cosines, 1.0, atol=1e-12)

    def test_orthogonal(self):
        U = SubspaceBasis(cols=np.eye(10)[:, :3])
        V = SubspaceBasis(cols=np.eye(10)[:, 3:6])
        assert np.allclose(principal_angles(U, V).cosines, 0.0)

    def test_sorted_and_clipped(self):
        U = random_subspace(40, 6, 2)
        V = random_subspace(40, 6, 3)
        c = principal_angles(U, V).cosines
        assert np.all(np.diff(c) <= 0)
        assert np.all((c >= 0) & (c <= 1))

    def test_projector_difference_spectrum_oracle(self):
        # nonzero singular values of U U^T - V V^T are the angle sines,
        # each occurring twice
        N, K = 40, 5
        U = random_subspace(N, K, 4)
        V = random_subspace(N, K, 5)
        sines = np.sqrt(1.0 - principal_angles(U, V).cosines ** 2)
        diff = U.cols @ U.cols.T - V.cols @ V.cols.T
        sv = np.linalg.svd(diff, compute_uv=False)
        expected = np.sort(np.concatenate([sines, sines]))[::-1]
        assert np.allclose(sv[: 2 * K], expected, atol=1e-8)
        assert np.allclose(sv[2 * K :], 0.0, atol=1e-8)

    def test_factors_orthogonal(self):
        U = random_subspace(25, 3, 6)
        V = random_subspace(25, 3, 7)
        pa = principal_angles(U, V, keep_factors=True)
        assert np.abs(pa.W.T @ pa.W - np.eye(3)).max() < 1e-10
        assert np.abs(pa.V.T @ pa.V - np.eye(3)).max() < 1e-10
        rebuilt = pa.W @ np.diag(pa.cosines) @ pa.V.T
        assert np.allclose(rebuilt, U.cols.T @ V.cols, atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            principal_angles(random_subspace(30, 3, 0), random_subspace(30, 4, 0))


class TestWeylGap:
    def test_identical_subspaces(self):
        A = sample_projector(60, 10, 1)
        U = random_subspace(60, 3, 2)
        res = weyl_gap(A, U, U)
        assert np.allclose(res.gaps, 0.0, atol=1e-12)

    def test_random_triples_certified(self):
        for t in range(60):
            A = sample_projector(120, 12, 3 * t)
            U = random_subspace(120, 4, 3 * t + 1)
            V = random_subspace(120, 4, 3 * t + 2)
            res = weyl_gap(A, U, V)  # raises on violation
            assert res.max_gap <= res.bound + 1e-10

    def test_non_orthogonal_projector_rejected(self):
        A = sample_projector(40, 8, 0)
        bad = Projector(rows=2.0 * A.rows, M=8, N=40, seed=0)
        U = random_subspace(40, 3, 1)
        with pytest.raises(ValueError):
            weyl_gap(bad, U, U)

    def test_requires_K_le_M(self):
        A = sample_projector(40, 2, 0)
        U = random_subspace(40, 3, 1)
        with pytest.raises(ValueError):
            weyl_gap(A, U, U)


def test_weyl_breakdown_is_raising():
    # sanity: the certification path raises NumericalBreakdown rather than
    # silently returning when fed an inconsistent bound
    A = sample_projector(30, 6, 0)
    U = random_subspace(30, 2, 1)
    V = random_subspace(30, 2, 2)
    res = weyl_gap(A, U, V)
    assert isinstance(res.bound, float)
    with pytest.raises(NumericalBreakdown):
        weyl_gap(A, U, V, tol=-1.0 - res.bound)  # force an impossible tolerance
