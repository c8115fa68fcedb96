import math

import numpy as np
import pytest
from conftest import finite_diff, random_prob_rows, rel_err

from clipdiv.errors import (DegenerateInputError, DimensionError, InvalidLabelError,
                            InvalidParameterError)
from clipdiv.losses import (LossWeights, absolute_divergence, relative_divergence,
                            source_cls_loss, target_pl_loss, total_objective)
from clipdiv.numerics import softmax


def onehot(labels, k):
    out = np.zeros((len(labels), k))
    out[np.arange(len(labels)), labels] = 1.0
    return out


class TestClassificationLosses:
    def test_perfect_prediction_zero_loss(self):
        labels = np.array([0, 2, 1])
        loss, grad = source_cls_loss(onehot(labels, 3), labels)
        assert loss == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_uniform_probs_log_k(self):
        probs = np.full((5, 4), 0.25)
        loss, _ = source_cls_loss(probs, np.array([0, 1, 2, 3, 0]))
        assert loss == pytest.approx(math.log(4), abs=1e-12)

    def test_pl_loss_uniform_two_classes(self):
        probs = np.full((3, 2), 0.5)
        loss, _ = target_pl_loss(probs, np.array([1, 0, 1]))
        assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_out_of_range_label(self):
        with pytest.raises(InvalidLabelError):
            source_cls_loss(np.full((2, 3), 1 / 3), np.array([0, 3]))
        with pytest.raises(InvalidLabelError):
            target_pl_loss(np.full((2, 3), 1 / 3), np.array([-1, 0]))

    def test_gradient_matches_finite_differences(self):
        gen = np.random.default_rng(11)
        for _ in range(5):
            n, k = 4, 3
            logits = gen.standard_normal((n, k))
            labels = gen.integers(0, k, n)
            _, grad = source_cls_loss(softmax(logits, 1.0), labels)

            def scalar(z):
                return source_cls_loss(softmax(z, 1.0), labels)[0]

            assert rel_err(grad, finite_diff(scalar, logits)) <= 1e-4


class TestAbsoluteDivergence:
    def test_equal_distributions_zero(self, rng):
        probs = random_prob_rows(rng, 6, 4)
        loss, grad = absolute_divergence(probs, probs)
        assert loss == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(grad, 0.0, atol=1e-9)

    def test_onehot_guidance_uniform_model(self):
        guidance = np.array([[1.0, 0.0]])
        model = np.array([[0.5, 0.5]])
        loss, _ = absolute_divergence(model, guidance)
        assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            absolute_divergence(random_prob_rows(rng, 3, 4), random_prob_rows(rng, 3, 5))

    def test_unknown_direction(self, rng):
        p = random_prob_rows(rng, 2, 3)
        with pytest.raises(InvalidParameterError):
            absolute_divergence(p, p, direction="sideways")

    @pytest.mark.parametrize("direction", ["guidance_first", "model_first"])
    def test_gradient_matches_finite_differences(self, direction):
        gen = np.random.default_rng(23)
        for _ in range(5):
            n, k = 4, 3
            logits = gen.standard_normal((n, k))
            guidance = gen.dirichlet(np.full(k, 2.0), size=n)
            _, grad = absolute_divergence(softmax(logits, 1.0), guidance, direction)

            def scalar(z):
                return absolute_divergence(softmax(z, 1.0), guidance, direction)[0]

            assert rel_err(grad, finite_diff(scalar, logits)) <= 1e-4


class TestRelativeDivergence:
    def build(self, rng, b=5, k=4):
        src_g = random_prob_rows(rng, b, k)
        tgt_g = random_prob_rows(rng, b, k)
        src_p = random_prob_rows(rng, b, k)
        tgt_p = random_prob_rows(rng, b, k)
        return src_p, tgt_p, src_g, tgt_g

    def test_positively_colinear_differences_zero(self, rng):
        src_g = random_prob_rows(rng, 4, 3)
        tgt_g = random_prob_rows(rng, 4, 3)
        d1 = src_g - tgt_g
        # model differences exactly 2 * guidance differences
        tgt_p = random_prob_rows(rng, 4, 3)
        src_p = tgt_p + 2.0 * d1
        loss, _, _ = relative_divergence(src_p, tgt_p, src_g, tgt_g)
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_antipodal_differences_two(self, rng):
        src_g = random_prob_rows(rng, 4, 3)
        tgt_g = random_prob_rows(rng, 4, 3)
        d1 = src_g - tgt_g
        tgt_p = random_prob_rows(rng, 4, 3)
        src_p = tgt_p - d1
        loss, _, _ = relative_divergence(src_p, tgt_p, src_g, tgt_g)
        assert loss == pytest.approx(2.0, abs=1e-9)

    def test_orthogonal_differences_one(self):
        src_g = np.array([[0.6, 0.2, 0.1, 0.1]])
        tgt_g = np.array([[0.2, 0.6, 0.1, 0.1]])   # d1 along (1,-1,0,0)
        tgt_p = np.array([[0.25, 0.25, 0.4, 0.1]])
        src_p = np.array([[0.25, 0.25, 0.1, 0.4]])  # d2 along (0,0,-,+), orthogonal to d1
        loss, _, _ = relative_divergence(src_p, tgt_p, src_g, tgt_g)
        assert loss == pytest.approx(1.0, abs=1e-9)

    def test_bounded_in_zero_two(self, rng):
        for _ in range(20):
            loss, _, _ = relative_divergence(*self.build(rng))
            assert 0.0 <= loss <= 2.0

    def test_invariant_under_guidance_difference_rescale(self, rng):
        src_p, tgt_p, src_g, tgt_g = self.build(rng)
        loss1, g1, g2 = relative_divergence(src_p, tgt_p, src_g, tgt_g)
        # scale every guidance difference vector by 7 (cosine is scale-free)
        mid = (src_g + tgt_g) / 2.0
        d1 = (src_g - tgt_g) / 2.0
        loss2, _, _ = relative_divergence(src_p, tgt_p, mid + 7 * d1, mid - 7 * d1)
        assert loss2 == pytest.approx(loss1, abs=1e-9)

    def test_empty_batch_rejected(self):
        empty = np.zeros((0, 3))
        with pytest.raises(InvalidParameterError):
            relative_divergence(empty, empty, empty, empty)

    def test_all_degenerate_rejected(self, rng):
        p = random_prob_rows(rng, 3, 4)
        g = random_prob_rows(rng, 3, 4)
        with pytest.raises(DegenerateInputError):
            relative_divergence(p, p, g, g)  # model differences all zero

    def test_degenerate_pairs_skipped_and_mean_renormalized(self, rng):
        src_g = random_prob_rows(rng, 3, 3)
        tgt_g = random_prob_rows(rng, 3, 3)
        src_p = random_prob_rows(rng, 3, 3)
        tgt_p = random_prob_rows(rng, 3, 3)
        tgt_p[1] = src_p[1]  # pair 1 degenerate in model space
        loss, grad_s, grad_t = relative_divergence(src_p, tgt_p, src_g, tgt_g)
        keep = [0, 2]
        expected = np.mean([
            relative_divergence(src_p[i:i + 1], tgt_p[i:i + 1], src_g[i:i + 1], tgt_g[i:i + 1])[0]
            for i in keep])
        assert loss == pytest.approx(expected, abs=1e-12)
        np.testing.assert_allclose(grad_s[1], 0.0, atol=1e-15)
        np.testing.assert_allclose(grad_t[1], 0.0, atol=1e-15)

    def test_gradients_match_finite_differences(self):
        gen = np.random.default_rng(37)
        for _ in range(5):
            b, k = 4, 3
            src_z = gen.standard_normal((b, k))
            tgt_z = gen.standard_normal((b, k))
            src_g = gen.dirichlet(np.full(k, 2.0), size=b)
            tgt_g = gen.dirichlet(np.full(k, 2.0), size=b)
            _, grad_s, grad_t = relative_divergence(
                softmax(src_z, 1.0), softmax(tgt_z, 1.0), src_g, tgt_g)

            def scalar_src(z):
                return relative_divergence(softmax(z, 1.0), softmax(tgt_z, 1.0), src_g, tgt_g)[0]

            def scalar_tgt(z):
                return relative_divergence(softmax(src_z, 1.0), softmax(z, 1.0), src_g, tgt_g)[0]

            assert rel_err(grad_s, finite_diff(scalar_src, src_z)) <= 1e-4
            assert rel_err(grad_t, finite_diff(scalar_tgt, tgt_z)) <= 1e-4


class TestTotalObjective:
    def parts(self, n_s=4, n_t=3, k=3):
        zs = np.zeros((n_s, k))
        zt = np.zeros((n_t, k))
        return dict(
            cls_source=(1.0, zs.copy()),
            abs_source=(0.2, zs.copy()),
            abs_target=(0.3, zt.copy()),
            rel=(2.0, zs.copy(), zt.copy()),
            pl=(3.0, zt.copy()),
        )

    def test_paper_default_weights(self):
        weights = LossWeights()
        assert (weights.lambda_abs, weights.lambda_rel, weights.lambda_pl) == (10.0, 1.0, 0.1)

    def test_hand_arithmetic(self):
        parts = self.parts()
        parts["cls_source"] = (1.0, parts["cls_source"][1])
        parts["abs_source"] = (0.5, parts["abs_source"][1])
        parts["abs_target"] = (0.0, parts["abs_target"][1])
        parts["rel"] = (2.0, *parts["rel"][1:])
        parts["pl"] = (3.0, parts["pl"][1])
        bundle = total_objective(weights=LossWeights(10, 1, 0.1), **parts)
        assert bundle.total == pytest.approx(1 + 10 * 0.5 + 1 * 2.0 + 0.1 * 3.0, abs=1e-12)

    def test_zero_weights_degenerate_to_source_classifier(self):
        bundle = total_objective(weights=LossWeights(0, 0, 0), **self.parts())
        assert bundle.total == pytest.approx(bundle.cls_source, abs=1e-15)

    def test_abs_total_identity(self, rng):
        parts = self.parts()
        bundle = total_objective(weights=LossWeights(), **parts)
        assert bundle.abs_total == pytest.approx(bundle.abs_source + bundle.abs_target, abs=1e-12)

    def test_affine_in_each_component(self):
        base = total_objective(weights=LossWeights(10, 1, 0.1), **self.parts())
        bumped = self.parts()
        bumped["rel"] = (bumped["rel"][0] + 1.0, *bumped["rel"][1:])
        assert total_objective(weights=LossWeights(10, 1, 0.1), **bumped).total == \
            pytest.approx(base.total + 1.0, abs=1e-12)

    def test_gradients_combined_with_weights(self, rng):
        n_s, n_t, k = 4, 3, 3
        parts = dict(
            cls_source=(1.0, rng.standard_normal((n_s, k))),
            abs_source=(0.2, rng.standard_normal((n_s, k))),
            abs_target=(0.3, rng.standard_normal((n_t, k))),
            rel=(2.0, rng.standard_normal((n_s, k)), rng.standard_normal((n_t, k))),
            pl=(3.0, rng.standard_normal((n_t, k))),
        )
        w = LossWeights(10, 1, 0.1)
        bundle = total_objective(weights=w, **parts)
        np.testing.assert_allclose(
            bundle.grad_logits_source,
            parts["cls_source"][1] + 10 * parts["abs_source"][1] + 1 * parts["rel"][1],
            atol=1e-12)
        np.testing.assert_allclose(
            bundle.grad_logits_target,
            10 * parts["abs_target"][1] + 1 * parts["rel"][2] + 0.1 * parts["pl"][1],
            atol=1e-12)

    def test_negative_weight_rejected(self):
        with pytest.raises(InvalidParameterError):
            LossWeights(-1.0, 0.0, 0.0)

    def test_mismatched_gradient_shapes_rejected(self, rng):
        parts = self.parts()
        parts["pl"] = (3.0, np.zeros((99, 3)))
        with pytest.raises(DimensionError):
            total_objective(weights=LossWeights(), **parts)
