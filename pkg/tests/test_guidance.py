import numpy as np
import pytest

from clipdiv.dataio import EmbeddingDataset, SynthConfig, synth_generate
from clipdiv.errors import ConfigurationError, DegenerateInputError, DimensionError
from clipdiv.guidance import cache_digest, guidance_cache, zero_shot_probs
from clipdiv.numerics import validate_prob_rows
from clipdiv.prompts import PromptBank


def orthonormal_texts(k, d):
    m = np.zeros((k, d))
    m[np.arange(k), np.arange(k)] = 1.0
    return m


class TestZeroShotProbs:
    def test_matching_embedding_dominates(self):
        texts = orthonormal_texts(3, 5)
        image = texts[2:3].copy()
        dist = zero_shot_probs(image, texts, 0.01)
        # cosines (0, 0, 1) scaled by 1/tau = 100
        assert np.argmax(dist.probs[0]) == 2
        assert dist.probs[0, 2] > 0.999

    def test_identical_text_rows_give_uniform(self):
        texts = np.tile(np.array([[1.0, 2.0, 0.0]]), (4, 1))
        dist = zero_shot_probs(np.array([[0.3, -1.0, 2.0]]), texts, 0.5)
        np.testing.assert_allclose(dist.probs, np.full((1, 4), 0.25), atol=1e-12)

    def test_empty_batch(self):
        dist = zero_shot_probs(np.zeros((0, 5)), orthonormal_texts(3, 5), 0.01)
        assert dist.probs.shape == (0, 3)

    def test_rows_are_valid_distributions(self, rng):
        dist = zero_shot_probs(rng.standard_normal((20, 8)), rng.standard_normal((5, 8)), 0.07)
        validate_prob_rows(dist.probs)

    def test_width_mismatch(self, rng):
        with pytest.raises(DimensionError):
            zero_shot_probs(rng.standard_normal((2, 4)), rng.standard_normal((3, 5)), 0.01)

    def test_zero_image_row_named(self, rng):
        imgs = rng.standard_normal((3, 4))
        imgs[1] = 0.0
        with pytest.raises(DegenerateInputError, match="image embedding row 1"):
            zero_shot_probs(imgs, rng.standard_normal((2, 4)), 0.01)

    def test_zero_text_row_named(self, rng):
        texts = rng.standard_normal((3, 4))
        texts[2] = 0.0
        with pytest.raises(DegenerateInputError, match="text embedding row 2"):
            zero_shot_probs(rng.standard_normal((2, 4)), texts, 0.01)

    def test_argmax_matches_raw_cosines_for_any_tau(self, rng):
        imgs = rng.standard_normal((15, 6))
        texts = rng.standard_normal((4, 6))
        norms_i = imgs / np.linalg.norm(imgs, axis=1, keepdims=True)
        norms_t = texts / np.linalg.norm(texts, axis=1, keepdims=True)
        raw_argmax = np.argmax(norms_i @ norms_t.T, axis=1)
        for tau in (0.005, 0.01, 0.05, 1.0):
            dist = zero_shot_probs(imgs, texts, tau)
            np.testing.assert_array_equal(np.argmax(dist.probs, axis=1), raw_argmax)


def small_bank_and_dataset(rng, n=10, k=3, d=6):
    bank = PromptBank(
        class_names=tuple(f"c{i}" for i in range(k)),
        source_text=rng.standard_normal((k, d)),
        target_text=rng.standard_normal((k, d)),
        agnostic_text=rng.standard_normal((k, d)),
    )
    dataset = EmbeddingDataset(
        domain_name="toy",
        class_names=bank.class_names,
        inputs=rng.standard_normal((n, 4)),
        clip_embs=rng.standard_normal((n, d)),
        labels=rng.integers(0, k, n),
    )
    return bank, dataset


class TestGuidanceCache:
    def test_three_sets_for_target(self, rng):
        bank, dataset = small_bank_and_dataset(rng)
        cache = guidance_cache(dataset, bank, 0.01, include_target_specific=True)
        assert sorted(cache) == ["agnostic", "averaged", "target_specific"]
        for dist in cache.values():
            assert dist.probs.shape == (10, 3)
            np.testing.assert_allclose(dist.probs.sum(axis=1), 1.0, atol=1e-9)

    def test_two_sets_for_source(self, rng):
        bank, dataset = small_bank_and_dataset(rng)
        assert sorted(guidance_cache(dataset, bank, 0.01)) == ["agnostic", "averaged"]

    def test_identical_calls_bit_identical(self, rng):
        bank, dataset = small_bank_and_dataset(rng)
        a = guidance_cache(dataset, bank, 0.01, include_target_specific=True)
        b = guidance_cache(dataset, bank, 0.01, include_target_specific=True)
        assert cache_digest(a) == cache_digest(b)
        for name in a:
            assert a[name].probs.tobytes() == b[name].probs.tobytes()

    def test_rows_match_per_row_recomputation(self, rng):
        bank, dataset = small_bank_and_dataset(rng)
        cache = guidance_cache(dataset, bank, 0.01)
        for i in range(dataset.num_samples):
            single = zero_shot_probs(dataset.clip_embs[i:i + 1], bank.agnostic_text, 0.01)
            np.testing.assert_allclose(cache["agnostic"].probs[i], single.probs[0], atol=1e-10)

    def test_width_mismatch_rejected(self, rng):
        bank, dataset = small_bank_and_dataset(rng)
        bad = EmbeddingDataset(domain_name="bad", class_names=bank.class_names,
                               inputs=dataset.inputs, clip_embs=rng.standard_normal((10, 9)))
        with pytest.raises(ConfigurationError):
            guidance_cache(bad, bank, 0.01)

    def test_synthetic_roundtrip_distributions(self):
        source, target, bank = synth_generate(SynthConfig(k=3, n_per_domain=10, seed=11))
        cache = guidance_cache(target, bank, 0.01, include_target_specific=True)
        assert len(cache) == 3
        for dist in cache.values():
            assert dist.probs.shape == (10, 3)
            np.testing.assert_allclose(dist.probs.sum(axis=1), 1.0, atol=1e-9)
