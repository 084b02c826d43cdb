import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from nashavg.hodge import (
    ELO_ALPHA,
    AntisymmetricLogitMatrix,
    RatingVector,
    ScoreMatrix,
    avt_averages,
    avt_curl_criterion,
    avt_residual,
    curl,
    div,
    embed_avt,
    grad,
    hodge_decompose,
    inner,
    logit_matrix,
    max_abs_curl,
    repair_antisymmetric,
    rot,
    schur_antisym,
    sigmoid,
    sigmoid_matrix,
)

from conftest import CYCLE, GO, LN99, RPS, RPS_DUP, SUITE, TRANS, random_antisym


class TestTypes:
    def test_logit_matrix_type_zeroes_diagonal(self):
        a = AntisymmetricLogitMatrix(np.array([[0.0, 2.0], [-2.0, 0.0]]), ("x", "y"))
        assert a.n == 2
        assert a.labels == ("x", "y")

    def test_small_asymmetry_repaired(self):
        a = np.array([[0.0, 1.0], [-1.0 + 1e-11, 0.0]])
        out = repair_antisymmetric(a)
        np.testing.assert_array_equal(out, -out.T)

    def test_large_asymmetry_rejected(self):
        with pytest.raises(ValueError):
            AntisymmetricLogitMatrix(np.array([[0.0, 1.0], [-0.5, 0.0]]))

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            AntisymmetricLogitMatrix(np.zeros((2, 2)), ("a", "a"))

    def test_rating_vector_zero_sum(self):
        with pytest.raises(ValueError):
            RatingVector(np.array([1.0, 0.0]))
        r = RatingVector.centered([3.0, 1.0])
        np.testing.assert_allclose(r.values, [1.0, -1.0])

    def test_display_round_trip(self):
        r = RatingVector.from_display([-63.0, 63.0, 0.0, 0.0])
        np.testing.assert_allclose(r.values[1], 63.0 * ELO_ALPHA)
        np.testing.assert_allclose(r.display(), [-63.0, 63.0, 0.0, 0.0])

    def test_score_matrix_needs_cells(self):
        with pytest.raises(ValueError):
            ScoreMatrix(np.zeros((0, 2)))


class TestOperators:
    def test_grad_examples(self):
        np.testing.assert_array_equal(grad([1.0, 0.0, -1.0]), TRANS)
        np.testing.assert_array_equal(grad([0.0, 0.0, 0.0]), np.zeros((3, 3)))
        np.testing.assert_array_equal(grad([2.0, -2.0]), [[0.0, 4.0], [-4.0, 0.0]])

    def test_div_examples(self):
        np.testing.assert_allclose(div(RPS).values, 0.0, atol=1e-12)
        np.testing.assert_allclose(div(RPS_DUP).values, [-1.15, 1.15, 0.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(div(TRANS).values, [1.0, 0.0, -1.0], atol=1e-12)

    def test_curl_examples(self):
        # C[0, 2] = -1, so the three terms are 1 + 1 + 1
        assert curl(CYCLE, 0, 1, 2) == pytest.approx(3.0)
        assert curl(RPS, 0, 1, 2) == pytest.approx(13.8)
        assert curl(grad([0.3, -1.2, 0.9]), 2, 0, 1) == pytest.approx(0.0, abs=1e-12)

    def test_curl_index_error(self):
        with pytest.raises(IndexError):
            curl(RPS, 0, 1, 3)

    def test_max_abs_curl(self):
        assert max_abs_curl(TRANS) == pytest.approx(0.0, abs=1e-12)
        assert max_abs_curl(RPS) == pytest.approx(13.8)

    def test_rot_examples(self):
        np.testing.assert_allclose(rot(TRANS), 0.0, atol=1e-12)
        np.testing.assert_allclose(rot(CYCLE), CYCLE, atol=1e-12)
        np.testing.assert_allclose(rot(CYCLE + TRANS), CYCLE, atol=1e-12)

    def test_rot_is_mean_curl(self, rng):
        a = random_antisym(rng, 5)
        n = a.shape[0]
        brute = np.array([[sum(curl(a, i, j, k) for k in range(n)) / n for j in range(n)] for i in range(n)])
        np.testing.assert_allclose(rot(a), brute, atol=1e-12)


class TestHodgeDecomposition:
    @pytest.mark.parametrize(
        "a, transitive, cyclic, ratings",
        [
            (TRANS, TRANS, np.zeros((3, 3)), [1.0, 0.0, -1.0]),
            (CYCLE, np.zeros((3, 3)), CYCLE, [0.0, 0.0, 0.0]),
            (CYCLE + TRANS, TRANS, CYCLE, [1.0, 0.0, -1.0]),
        ],
    )
    def test_worked_cases(self, a, transitive, cyclic, ratings):
        parts = hodge_decompose(a)
        np.testing.assert_allclose(parts.transitive, transitive, atol=1e-12)
        np.testing.assert_allclose(parts.cyclic, cyclic, atol=1e-12)
        np.testing.assert_allclose(parts.ratings.values, ratings, atol=1e-12)
        assert abs(inner(parts.transitive, parts.cyclic)) < 1e-8

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(2, 20), seed=st.integers(0, 2**31 - 1))
    def test_random_identities(self, n, seed):
        a = random_antisym(np.random.default_rng(seed), n)
        parts = hodge_decompose(a)
        np.testing.assert_allclose(parts.transitive + parts.cyclic, a, atol=1e-9)
        assert abs(inner(parts.transitive, parts.cyclic)) <= 1e-8 * np.sum(a**2)
        np.testing.assert_allclose(div(parts.cyclic).values, 0.0, atol=1e-9)

    def test_div_grad_identity(self, rng):
        r = rng.normal(size=9)
        r -= r.mean()
        np.testing.assert_allclose(div(grad(r)).values, r, atol=1e-10)


class TestSchur:
    def test_embedding_pairs(self):
        f = schur_antisym(embed_avt(np.array([[1.0, 0.0], [0.0, 2.0]]), mode="naive"))
        np.testing.assert_allclose(f.pairs, [2.0, 1.0], atol=1e-12)

    @pytest.mark.parametrize("shape", [(8, 1), (2, 6), (7, 3)])
    def test_rectangular_embedding_rank(self, rng, shape):
        # round-off singular values must not survive as extra pairs
        s = rng.normal(size=shape)
        f = schur_antisym(embed_avt(s, mode="naive"))
        np.testing.assert_allclose(f.pairs, np.linalg.svd(s, compute_uv=False), atol=1e-12)

    def test_basis_gauge_is_fixed(self, rng):
        a = random_antisym(rng, 6)
        perm_free = schur_antisym(a).basis
        again = schur_antisym(a.copy()).basis
        np.testing.assert_array_equal(perm_free, again)
        assert perm_free[0, 0] > 0 and abs(perm_free[0, 1]) < 1e-12

    def test_zero_matrix(self):
        f = schur_antisym(np.zeros((4, 4)))
        assert len(f.pairs) == 0
        assert f.basis.shape == (4, 0)

    def test_factor_invariants(self, rng):
        a = random_antisym(rng, 7)
        f = schur_antisym(a)
        q = f.basis
        np.testing.assert_allclose(q.T @ q, np.eye(q.shape[1]), atol=1e-8)
        assert np.linalg.norm(f.reconstruct() - a) <= 1e-7 * np.linalg.norm(a)
        assert np.all(np.diff(f.pairs) <= 0)
        assert len(f.pairs) == 3

    def test_block_sign(self):
        a = np.array([[0.0, 3.0], [-3.0, 0.0]])
        f = schur_antisym(a)
        np.testing.assert_allclose(f.block_matrix(), a, atol=1e-12)
        q1, q2 = f.basis[:, 0], f.basis[:, 1]
        np.testing.assert_allclose(a @ q1, -3.0 * q2, atol=1e-12)

    def test_transitive_plane(self):
        r = np.array([1.5, 0.5, -0.5, -1.5])
        f = schur_antisym(grad(r))
        assert len(f.pairs) == 1
        expected = np.column_stack([np.ones(4), r])
        assert subspace_angles(f.basis, expected).max() < 1e-6


class TestLogit:
    def test_even_odds(self):
        a = logit_matrix(np.full((2, 2), 0.5))
        np.testing.assert_array_equal(a.entries, np.zeros((2, 2)))

    def test_clamped_certainty(self):
        a = logit_matrix(np.array([[0.5, 1.0], [0.0, 0.5]]), clamp_eps=0.01)
        assert a.entries[0, 1] == pytest.approx(LN99)
        assert a.entries[1, 0] == pytest.approx(-LN99)

    def test_go_table(self):
        a = logit_matrix(GO, clamp_eps=0.01).entries
        assert np.all(np.isfinite(a))
        assert a[0, 1] == pytest.approx(np.log(0.7 / 0.3))
        np.testing.assert_array_equal(a, -a.T)

    def test_non_complementary_rejected(self):
        with pytest.raises(ValueError):
            logit_matrix(np.array([[0.5, 0.7], [0.5, 0.5]]))

    def test_sigmoid_values(self):
        np.testing.assert_array_equal(sigmoid_matrix(np.zeros((3, 3))), 0.5)
        assert sigmoid(4.6) == pytest.approx(0.990048, abs=1e-6)
        assert sigmoid(-800.0) == 0.0

    def test_round_trip(self, rng):
        x = rng.uniform(0.02, 0.98, size=(6, 6))
        p = np.triu(x, 1) + np.tril(1 - x.T, -1)
        np.fill_diagonal(p, 0.5)
        back = sigmoid_matrix(logit_matrix(p, clamp_eps=0.01).entries)
        np.testing.assert_allclose(back, p, atol=1e-12)


class TestAgentTask:
    def test_naive_single(self):
        np.testing.assert_array_equal(embed_avt(np.array([[1.0]]), mode="naive"), [[0.0, 1.0], [-1.0, 0.0]])

    def test_naive_structure(self):
        e = embed_avt(SUITE, mode="naive")
        assert e.shape == (6, 6)
        np.testing.assert_array_equal(e[:3, 3:], SUITE)
        np.testing.assert_array_equal(e[:3, :3], 0.0)
        np.testing.assert_array_equal(e[3:, 3:], 0.0)

    def test_averages(self):
        s, d = avt_averages(SUITE)
        np.testing.assert_allclose(s, [86.0, 85.0, 84.0])
        np.testing.assert_allclose(d, [-253.0 / 3, -84.0, -260.0 / 3])

    def test_hodge_embedding_is_grad_plus_residual(self, rng):
        x = rng.normal(size=(4, 3))
        e = embed_avt(x, mode="hodge")
        xc = x - x.mean()
        s, d = avt_averages(xc)
        resid = avt_residual(x)
        expected = grad(np.concatenate([s, d]))
        expected[:4, 4:] += resid
        expected[4:, :4] -= resid.T
        np.testing.assert_allclose(e, expected, atol=1e-12)
        np.testing.assert_allclose(e, -e.T, atol=1e-12)

    def test_averages_explain_transitive_scores(self):
        s = np.array([1.0, -2.0, 0.5])
        d = np.array([0.3, -0.1])
        x = s[:, None] - d[None, :]
        np.testing.assert_allclose(avt_residual(x), 0.0, atol=1e-12)
        assert avt_curl_criterion(x)
        e = embed_avt(x, mode="hodge")
        np.testing.assert_allclose(rot(e), 0.0, atol=1e-12)

    def test_curl_criterion(self):
        assert not avt_curl_criterion(SUITE)
        assert avt_curl_criterion(np.full((3, 4), 7.0))
