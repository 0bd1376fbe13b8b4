import numpy as np
import pytest

from pcgrbm import (
    CdStats,
    ConstraintSet,
    Dataset,
    GrbmParams,
    HiddenPairBatch,
    PcgrbmConfig,
    TrainConfig,
    combined_update,
    constraint_gradient,
    normalize,
    pairwise_penalty,
    penalty_trace,
    synth_blobs,
    train_grbm,
    train_pcgrbm,
)
from pcgrbm.guided import _constraint_gradient_elementwise


def params_of(W, sigma=None):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    p, q = W.shape
    return GrbmParams(
        W=W,
        a=np.zeros(p),
        b=np.zeros(q),
        sigma=np.ones(p) if sigma is None else np.asarray(sigma, dtype=float),
    )


def random_batch(rng, q, n_must, n_cannot):
    return HiddenPairBatch(
        must_s=rng.random((n_must, q)),
        must_t=rng.random((n_must, q)),
        cannot_s=rng.random((n_cannot, q)),
        cannot_t=rng.random((n_cannot, q)),
    )


def zero_stats(p, q):
    return CdStats(
        pos_assoc=np.zeros((p, q)),
        neg_assoc=np.zeros((p, q)),
        pos_v=np.zeros(p),
        neg_v=np.zeros(p),
        pos_h=np.zeros(q),
        neg_h=np.zeros(q),
        batch_size=1,
    )


class TestPairwisePenalty:
    def test_identical_pairs_score_zero(self):
        rng = np.random.default_rng(0)
        h = rng.random((3, 4))
        batch = HiddenPairBatch(h, h.copy(), h, h.copy())
        assert pairwise_penalty(params_of(rng.normal(size=(2, 4))), batch) == (0.0, 0.0)

    def test_zero_weights_score_zero(self):
        rng = np.random.default_rng(1)
        batch = random_batch(rng, 3, 4, 5)
        assert pairwise_penalty(params_of(np.zeros((2, 3))), batch) == (0.0, 0.0)

    def test_hand_case(self):
        batch = HiddenPairBatch(
            must_s=np.array([[1.0, 0.0]]),
            must_t=np.array([[0.0, 0.0]]),
            cannot_s=np.zeros((0, 2)),
            cannot_t=np.zeros((0, 2)),
        )
        j_must, j_cannot = pairwise_penalty(params_of([[1.0, 0.0]]), batch)
        assert j_must == pytest.approx(1.0)
        assert j_cannot == 0.0

    def test_matches_definition(self):
        rng = np.random.default_rng(2)
        params = params_of(rng.normal(size=(3, 5)))
        batch = random_batch(rng, 5, 6, 4)
        j_must, j_cannot = pairwise_penalty(params, batch)
        by_hand_must = np.mean(
            [
                np.sum(((s - t) @ params.W.T) ** 2)
                for s, t in zip(batch.must_s, batch.must_t)
            ]
        )
        assert j_must == pytest.approx(by_hand_must, rel=1e-12)
        assert j_must >= 0 and j_cannot >= 0


class TestConstraintGradient:
    def test_zero_cases(self):
        rng = np.random.default_rng(3)
        h = rng.random((2, 3))
        same = HiddenPairBatch(h, h.copy(), h, h.copy())
        F_M, F_C = constraint_gradient(params_of(rng.normal(size=(2, 3))), same)
        np.testing.assert_array_equal(F_M, 0.0)
        np.testing.assert_array_equal(F_C, 0.0)
        F_M, F_C = constraint_gradient(params_of(np.zeros((2, 3))), random_batch(rng, 3, 2, 2))
        np.testing.assert_array_equal(F_M, 0.0)
        np.testing.assert_array_equal(F_C, 0.0)

    def test_hand_case(self):
        batch = HiddenPairBatch(
            must_s=np.array([[1.0, 0.0]]),
            must_t=np.array([[0.0, 0.0]]),
            cannot_s=np.zeros((0, 2)),
            cannot_t=np.zeros((0, 2)),
        )
        F_M, F_C = constraint_gradient(params_of([[1.0, 0.0]]), batch)
        np.testing.assert_allclose(F_M, [[2.0, 0.0]])
        np.testing.assert_array_equal(F_C, 0.0)

    def test_finite_difference_oracle(self):
        rng = np.random.default_rng(4)
        h_step = 1e-5
        for _ in range(10):
            p = int(rng.integers(1, 9))
            q = int(rng.integers(1, 9))
            params = params_of(rng.normal(size=(p, q)))
            batch = random_batch(rng, q, int(rng.integers(1, 7)), int(rng.integers(1, 7)))
            F_M, F_C = constraint_gradient(params, batch)
            for side, F in ((0, F_M), (1, F_C)):
                for i in range(p):
                    for j in range(q):
                        Wp, Wm = params.W.copy(), params.W.copy()
                        Wp[i, j] += h_step
                        Wm[i, j] -= h_step
                        jp = pairwise_penalty(params_of(Wp), batch)[side]
                        jm = pairwise_penalty(params_of(Wm), batch)[side]
                        fd = (jp - jm) / (2 * h_step)
                        assert F[i, j] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_matrix_form_matches_elementwise(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            p = int(rng.integers(1, 7))
            q = int(rng.integers(1, 7))
            params = params_of(rng.normal(size=(p, q)))
            batch = random_batch(rng, q, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            F_M, F_C = constraint_gradient(params, batch)
            E_M, E_C = _constraint_gradient_elementwise(params, batch)
            np.testing.assert_allclose(F_M, E_M, atol=1e-12)
            np.testing.assert_allclose(F_C, E_C, atol=1e-12)

    def test_duplicated_pairs_leave_mean_unchanged(self):
        rng = np.random.default_rng(6)
        params = params_of(rng.normal(size=(3, 4)))
        batch = random_batch(rng, 4, 3, 2)
        doubled = HiddenPairBatch(
            must_s=np.vstack([batch.must_s, batch.must_s]),
            must_t=np.vstack([batch.must_t, batch.must_t]),
            cannot_s=batch.cannot_s,
            cannot_t=batch.cannot_t,
        )
        np.testing.assert_allclose(
            constraint_gradient(params, batch)[0], constraint_gradient(params, doubled)[0], atol=1e-14
        )
        assert pairwise_penalty(params, batch)[0] == pytest.approx(
            pairwise_penalty(params, doubled)[0], rel=1e-12
        )


class TestCombinedUpdate:
    def test_lambda_near_one_matches_plain_cd(self):
        from pcgrbm import apply_cd_update

        rng = np.random.default_rng(7)
        p, q = 3, 4
        params = params_of(rng.normal(size=(p, q)))
        stats = CdStats(
            pos_assoc=rng.normal(size=(p, q)),
            neg_assoc=rng.normal(size=(p, q)),
            pos_v=rng.normal(size=p),
            neg_v=rng.normal(size=p),
            pos_h=rng.normal(size=q),
            neg_h=rng.normal(size=q),
            batch_size=5,
        )
        F = rng.normal(size=(p, q))
        cfg = PcgrbmConfig(base=TrainConfig(epsilon=0.3, epochs=1), lambda_=1 - 1e-12)
        guided = combined_update(params, stats, F, F * 0.5, cfg)
        plain = apply_cd_update(params, stats, 0.3)
        np.testing.assert_allclose(guided.W, plain.W, atol=1e-9)
        np.testing.assert_array_equal(guided.a, plain.a)
        np.testing.assert_array_equal(guided.b, plain.b)

    def test_equal_penalty_gradients_cancel(self):
        rng = np.random.default_rng(8)
        params = params_of(rng.normal(size=(2, 3)))
        stats = zero_stats(2, 3)
        F = rng.normal(size=(2, 3))
        for mode in ("paper_exact", "descent"):
            cfg = PcgrbmConfig(base=TrainConfig(epsilon=0.1, epochs=1), sign_mode=mode)
            out = combined_update(params, stats, F, F.copy(), cfg)
            np.testing.assert_allclose(out.W, params.W, atol=1e-15)

    def test_sign_conventions(self):
        params = params_of(np.zeros((2, 2)))
        stats = zero_stats(2, 2)
        F_M = np.ones((2, 2))
        F_C = np.zeros((2, 2))
        exact = combined_update(
            params, stats, F_M, F_C, PcgrbmConfig(base=TrainConfig(0.1, 1), lambda_=0.7, sign_mode="paper_exact")
        )
        np.testing.assert_allclose(exact.W, 0.3, atol=1e-15)
        desc = combined_update(
            params,
            stats,
            F_M,
            F_C,
            PcgrbmConfig(base=TrainConfig(0.1, 1), lambda_=0.7, sign_mode="descent", constraint_rate=1.0),
        )
        np.testing.assert_allclose(desc.W, -0.3, atol=1e-15)

    def test_descent_step_does_not_increase_objective(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            p = int(rng.integers(1, 6))
            q = int(rng.integers(1, 6))
            params = params_of(rng.normal(size=(p, q)))
            batch = random_batch(rng, q, int(rng.integers(1, 5)), int(rng.integers(1, 5)))
            F_M, F_C = constraint_gradient(params, batch)
            cfg = PcgrbmConfig(
                base=TrainConfig(epsilon=0.1, epochs=1),
                sign_mode="descent",
                constraint_rate=1e-6,
            )
            stepped = combined_update(params, zero_stats(p, q), F_M, F_C, cfg)
            before = np.subtract(*pairwise_penalty(params, batch))
            after = np.subtract(*pairwise_penalty(stepped, batch))
            assert after <= before + 1e-12


class TestTrainPcgrbm:
    def test_empty_constraints_reduce_to_scaled_cd(self):
        ds = normalize(synth_blobs(40, 2, 4, 5.0, seed=0))
        lam = 0.7
        for seed in range(3):
            base = TrainConfig(epsilon=0.2, epochs=1, seed=seed)
            guided = train_pcgrbm(ds, ConstraintSet(), PcgrbmConfig(base=base, lambda_=lam), q=5)
            plain = train_grbm(ds, base, q=5)
            init = train_grbm(ds, TrainConfig(epsilon=0.0, epochs=1, seed=seed), q=5)
            np.testing.assert_allclose(
                guided.W - init.W, lam * (plain.W - init.W), atol=1e-12
            )
            np.testing.assert_array_equal(guided.a, plain.a)
            np.testing.assert_array_equal(guided.b, plain.b)

    def test_deterministic(self):
        ds = normalize(synth_blobs(40, 2, 4, 5.0, seed=1))
        cs = ConstraintSet(must=[(0, 1)], cannot=[(0, 20)])
        cfg = PcgrbmConfig(base=TrainConfig(epsilon=0.05, epochs=4, seed=3))
        a = train_pcgrbm(ds, cs, cfg, q=4)
        b = train_pcgrbm(ds, cs, cfg, q=4)
        np.testing.assert_array_equal(a.W, b.W)

    def test_out_of_range_constraint_rejected(self):
        ds = normalize(synth_blobs(10, 2, 3, 5.0, seed=0))
        cs = ConstraintSet(must=[(0, 10)])
        with pytest.raises(IndexError):
            train_pcgrbm(ds, cs, PcgrbmConfig(base=TrainConfig(0.1, 1, seed=0)), q=2)

    def test_unnormalized_rejected(self):
        ds = synth_blobs(10, 2, 3, 5.0, seed=0)
        with pytest.raises(ValueError, match="normalized"):
            train_pcgrbm(ds, ConstraintSet(), PcgrbmConfig(base=TrainConfig(0.1, 1)), q=2)

    def test_minibatch_defers_pairs_across_batches(self):
        ds = normalize(synth_blobs(30, 3, 4, 5.0, seed=2))
        cs = ConstraintSet(must=[(0, 29), (3, 17)], cannot=[(1, 28)])
        cfg = PcgrbmConfig(base=TrainConfig(epsilon=0.05, epochs=3, batch_size=7, seed=4))
        params = train_pcgrbm(ds, cs, cfg, q=4)
        assert np.all(np.isfinite(params.W))
        again = train_pcgrbm(ds, cs, cfg, q=4)
        np.testing.assert_array_equal(params.W, again.W)

    def test_lambda_validation(self):
        with pytest.raises(ValueError):
            PcgrbmConfig(base=TrainConfig(0.1, 1), lambda_=1.0)
        with pytest.raises(ValueError):
            PcgrbmConfig(base=TrainConfig(0.1, 1), lambda_=0.0)
        with pytest.raises(ValueError):
            PcgrbmConfig(base=TrainConfig(0.1, 1), sign_mode="exact")


class TestPenaltyTrace:
    def test_zero_weights(self):
        ds = normalize(synth_blobs(20, 2, 3, 5.0, seed=0))
        params = params_of(np.zeros((3, 4)))
        cs = ConstraintSet(must=[(0, 1)], cannot=[(0, 2)])
        j_must, j_cannot, recon_mse = penalty_trace(params, ds, cs)
        assert j_must == 0.0 and j_cannot == 0.0
        assert recon_mse == pytest.approx(np.mean((ds.features - params.a) ** 2))

    def test_perfect_autoencoding_fixed_point(self):
        a = np.array([0.0, 1.0, -1.0])
        features = np.tile(a, (4, 1))
        ds = Dataset("fp", features, normalized=True)
        params = GrbmParams(W=np.zeros((3, 2)), a=a, b=np.zeros(2), sigma=np.ones(3))
        _, _, recon_mse = penalty_trace(params, ds, ConstraintSet())
        assert recon_mse == 0.0

    def test_matches_pairwise_penalty(self):
        from pcgrbm.grbm import hidden_prob

        rng = np.random.default_rng(10)
        ds = normalize(Dataset("d", rng.normal(size=(15, 3))))
        params = params_of(rng.normal(size=(3, 4)))
        cs = ConstraintSet(must=[(0, 1), (2, 3)], cannot=[(4, 5)])
        hidden = hidden_prob(params, ds.features)
        batch = HiddenPairBatch.from_hidden(hidden, cs)
        expected = pairwise_penalty(params, batch)
        got = penalty_trace(params, ds, cs)
        assert got[0] == expected[0] and got[1] == expected[1]


class TestHiddenPairBatch:
    def test_from_hidden_index_check(self):
        hidden = np.random.default_rng(0).random((5, 3))
        with pytest.raises(IndexError):
            HiddenPairBatch.from_hidden(hidden, ConstraintSet(must=[(0, 5)]))

    def test_entries_validated(self):
        with pytest.raises(ValueError):
            HiddenPairBatch(
                must_s=np.array([[1.5]]),
                must_t=np.array([[0.0]]),
                cannot_s=np.zeros((0, 1)),
                cannot_t=np.zeros((0, 1)),
            )
