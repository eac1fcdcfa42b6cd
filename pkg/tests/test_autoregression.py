import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from crossed_gibbs.autoregression import (
    NonGeometricError,
    analyze,
    build_B1_B2,
    build_M,
    build_M_prime,
    phi_bound,
    phi_upsilon,
    relaxation_time,
    spectral_norm,
    spectral_radius,
)
from crossed_gibbs.missingness import RegimeSpec, make_pattern, simulate
from crossed_gibbs.model import ObservationSet, VarianceComponents, level_weights, shrinkage_factors


def obs_from_mask(mask, seed=0):
    rows, cols = np.nonzero(mask)
    y = np.random.default_rng(seed).normal(size=rows.size)
    return ObservationSet.from_triplets(rows, cols, y, *mask.shape)


def complete(R, C):
    return obs_from_mask(np.ones((R, C), dtype=bool))


class TestBuildM:
    def test_complete_is_zero(self):
        M, _ = build_M(complete(20, 20), VarianceComponents(1, 1, 1))
        assert np.abs(M).max() < 1e-12

    def test_single_cell(self):
        M, _ = build_M(complete(1, 1), VarianceComponents(1, 1, 1))
        assert M.shape == (1, 1) and abs(M[0, 0]) < 1e-15

    def test_matches_B2B1_on_8x6(self):
        mask = np.random.default_rng(3).random((8, 6)) < 0.5
        obs = obs_from_mask(mask)
        vc = VarianceComponents(1.2, 0.8, 1.5)
        M, _ = build_M(obs, vc)
        B1, B2 = build_B1_B2(obs, vc)
        np.testing.assert_allclose(M, B2 @ B1, atol=1e-10, rtol=0)

    def test_matches_gaussian_conditioning(self):
        # independent route: coefficients of E(a1|a2), E(a2|a1) from the joint posterior
        mask = np.random.default_rng(4).random((7, 5)) < 0.6
        obs = obs_from_mask(mask)
        vc = VarianceComponents(0.6, 1.7, 0.9)
        B1o, B2o = oracles.conditional_coefficients(obs.rows, obs.cols, 7, 5, 0.6, 1.7, 0.9)
        B1, B2 = build_B1_B2(obs, vc)
        np.testing.assert_allclose(B1, B1o, atol=1e-12)
        np.testing.assert_allclose(B2, B2o, atol=1e-12)

    def test_centering_relation(self):
        mask = np.random.default_rng(5).random((9, 7)) < 0.5
        obs = obs_from_mask(mask)
        vc = VarianceComponents(1, 1, 1)
        M, M0 = build_M(obs, vc)
        _, w2 = level_weights(*shrinkage_factors(obs, vc))
        np.testing.assert_allclose(M, M0 - np.outer(w2, np.ones(7) @ M0), atol=1e-14)
        # ones^T (I - w2 1^T) = 0 on the left, so column sums of M vanish
        np.testing.assert_allclose(M.sum(axis=0), 0.0, atol=1e-13)


class TestB1B2:
    def test_complete_2x2_is_zero(self):
        B1, B2 = build_B1_B2(complete(2, 2), VarianceComponents(1, 1, 1))
        np.testing.assert_allclose(B1, 0.0, atol=1e-15)
        np.testing.assert_allclose(B2, 0.0, atol=1e-15)

    def test_empty_column(self):
        mask = np.ones((3, 3), dtype=bool)
        mask[:, 2] = False
        mask[0, 1] = False
        obs = obs_from_mask(mask)
        vc = VarianceComponents(1, 1, 1)
        _, B2 = build_B1_B2(obs, vc)
        _, w2 = level_weights(*shrinkage_factors(obs, vc))
        Zd = mask.astype(float)
        l = (Zd.T / (Zd.sum(axis=0) + vc.lambda_B)[:, None]).sum(axis=0)
        np.testing.assert_allclose(B2[2], w2[2] * l, atol=1e-15)


class TestSpectralNorm:
    def test_identity(self):
        assert spectral_norm(np.eye(5)) == pytest.approx(1.0, abs=1e-14)

    def test_diag(self):
        assert spectral_norm(np.diag([3.0, 1.0, 0.5])) == pytest.approx(3.0, abs=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_dense(self, seed):
        A = np.random.default_rng(seed).normal(size=(20, 20))
        ref = np.sqrt(np.linalg.eigh(A.T @ A)[0][-1])
        assert spectral_norm(A) == pytest.approx(ref, abs=1e-8)

    @pytest.mark.parametrize("seed", range(3))
    def test_power_iteration_path(self, seed):
        A = np.random.default_rng(seed).normal(size=(20, 20))
        ref = np.linalg.svd(A, compute_uv=False)[0]
        assert spectral_norm(A, dense_limit=0, tol=1e-14, max_iter=200_000) == pytest.approx(ref, rel=1e-6)

    def test_sparse_input(self):
        Z = sp.random(150, 120, density=0.05, random_state=1, format="csr")
        ref = np.linalg.svd(Z.toarray(), compute_uv=False)[0]
        assert spectral_norm(Z) == pytest.approx(ref, rel=1e-8)


class TestSpectralRadius:
    def test_nilpotent(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert spectral_radius(A) == 0.0
        assert spectral_norm(A) == pytest.approx(1.0)

    def test_symmetric_equals_norm(self):
        X = np.random.default_rng(2).normal(size=(15, 15))
        A = X + X.T
        assert spectral_radius(A) == pytest.approx(spectral_norm(A), rel=1e-10)

    def test_complete_M(self):
        M, _ = build_M(complete(10, 12), VarianceComponents(1, 1, 1))
        assert spectral_radius(M) < 1e-12

    def test_power_path_on_symmetric(self):
        X = np.random.default_rng(6).normal(size=(40, 40))
        A = X @ X.T / 40
        ref = np.max(np.abs(np.linalg.eigvalsh(A)))
        assert spectral_radius(A, dense_limit=0, tol=1e-13) == pytest.approx(ref, rel=1e-6)


class TestRelaxationTime:
    @pytest.mark.parametrize("r,t", [(0.0, 1.0), (0.5, 2.0)])
    def test_values(self, r, t):
        assert relaxation_time(r) == t

    def test_worst_bounded_case(self):
        assert relaxation_time(0.9857) == pytest.approx(69.93, abs=0.005)

    def test_non_geometric(self):
        with pytest.raises(NonGeometricError, match="non-geometric"):
            relaxation_time(1.0)


class TestPhi:
    def test_at_one(self):
        assert phi_upsilon(1.0) == 1.0

    def test_at_threshold(self):
        assert phi_upsilon(1.52) >= 0.0143
        assert phi_bound(1.52) <= 0.9857

    def test_monotone(self):
        grid = np.linspace(1.0, 1.52, 100)
        vals = np.array([phi_upsilon(u) for u in grid])
        assert np.all(np.diff(vals) < 0)


class TestMPrime:
    def test_uniform_is_zero(self):
        pat = make_pattern(RegimeSpec(1e4, 0.52, 0.52))
        assert np.abs(build_M_prime(pat)).max() < 1e-12

    @pytest.mark.parametrize("U", [1.2, 1.52])
    def test_submultiplicative(self, U):
        pat = make_pattern(RegimeSpec(1e4, 0.6, 0.6, "bounded", U, seed=2))
        full = spectral_norm(build_M_prime(pat))
        f1 = spectral_norm(build_M_prime(pat, "factor1"))
        f2 = spectral_norm(build_M_prime(pat, "factor2"))
        assert full <= f1 * f2 * (1 + 1e-10)

    def test_factor_bound_at_1_3(self):
        pat = make_pattern(RegimeSpec(1e4, 0.6, 0.6, "bounded", 1.3, seed=1))
        bound = 1 - 1 / 1.3**3 + 0.3**2
        assert bound == pytest.approx(0.6348, abs=1e-4)
        assert spectral_norm(build_M_prime(pat, "factor1")) ** 2 <= bound

    def test_annihilation(self):
        pat = make_pattern(RegimeSpec(1e4, 0.6, 0.5, "balanced", 2.0, seed=3))
        F = build_M_prime(pat, "factor1")
        v = np.sqrt(pat.expected_col_sums)
        assert np.linalg.norm(F.T @ F @ v) < 1e-10

    def test_zero_sum_rejected(self):
        p = np.array([[0.5, 0.0], [0.5, 0.0]])
        with pytest.raises(ValueError):
            build_M_prime(p)


class TestAnalyze:
    def test_complete_trel_one(self):
        b = analyze(complete(20, 20), VarianceComponents(1, 1, 1))
        assert b.spec_norm < 1e-12
        assert b.t_rel == 1.0

    def test_bundle_invariants(self):
        _, obs, _ = simulate(RegimeSpec(2000, 0.6, 0.6, "bounded", 1.3, seed=4))
        b = analyze(obs, VarianceComponents(1, 1, 1), with_factors=True)
        assert b.spec_radius <= b.spec_norm + 1e-9
        assert b.t_rel == pytest.approx(1 / (1 - b.spec_radius))
        np.testing.assert_allclose(b.M, b.B2 @ b.B1, atol=1e-10)
        assert set(b.report()) >= {"norm", "radius", "t_rel"}


@st.composite
def random_instance(draw):
    R = draw(st.integers(1, 12))
    C = draw(st.integers(1, 12))
    seed = draw(st.integers(0, 2**31))
    density = draw(st.floats(0.15, 1.0))
    rng = np.random.default_rng(seed)
    mask = rng.random((R, C)) < density
    mask[rng.integers(R), rng.integers(C)] = True
    v = [draw(st.floats(0.05, 20.0)) for _ in range(3)]
    return obs_from_mask(mask, seed), VarianceComponents(*v)


@settings(max_examples=60, deadline=None)
@given(random_instance())
def test_M_equals_B2B1_property(inst):
    obs, vc = inst
    M, _ = build_M(obs, vc)
    B1, B2 = build_B1_B2(obs, vc)
    np.testing.assert_allclose(M, B2 @ B1, atol=1e-10, rtol=0)
    assert spectral_radius(M) <= spectral_norm(M) + 1e-9
