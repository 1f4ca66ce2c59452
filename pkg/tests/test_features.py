import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from outbreak_onset.exceptions import ShapeError
from outbreak_onset.features import (
    FilterBank,
    GramFeatureExtractor,
    conv3d,
    default_bank,
    describe,
    extract_features,
    fuse,
    gram_matrix,
)
from outbreak_onset.volumes import CANONICAL_DISEASES, synthesize_volume

from .oracles import mean_pairwise_bruteforce

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_bank_layout():
    bank = default_bank()
    assert [layer.n_filters for layer in bank.layers] == [8, 16, 16, 32, 32]
    assert [layer.pool for layer in bank.layers] == [True, True, True, False, False]
    assert all(layer.weights.shape[-3:] == (3, 3, 3) for layer in bank.layers)
    again = FilterBank.build()
    assert all(np.array_equal(a.weights, b.weights) for a, b in zip(bank.layers, again.layers))


def test_conv3d_matches_direct_loop():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 5, 4, 6))
    w = rng.standard_normal((3, 2, 3, 3, 3))
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1), (1, 1)))
    expected = np.zeros((3, 5, 4, 6))
    for o in range(3):
        for z in range(5):
            for y in range(4):
                for xx in range(6):
                    expected[o, z, y, xx] = np.sum(padded[:, z:z + 3, y:y + 3, xx:xx + 3] * w[o])
    np.testing.assert_allclose(conv3d(x, w), expected, rtol=1e-12, atol=1e-12)


def test_zero_volume_gives_zero_features():
    F = extract_features(np.zeros((32, 32, 32)))
    assert F.shape == (32, 64)
    assert not F.any()
    assert not describe(np.zeros((32, 32, 32))).any()


def test_positive_homogeneity():
    vol = synthesize_volume(CANONICAL_DISEASES[1], 3)
    F1 = extract_features(vol)
    F2 = extract_features(2.0 * vol.data)
    np.testing.assert_allclose(F2, 2.0 * F1, rtol=1e-12)


def test_golden_checksum():
    vol = synthesize_volume(CANONICAL_DISEASES[0], 12345)
    F = extract_features(vol)
    assert F.shape == (32, 64)
    np.testing.assert_allclose(F.sum(), 1085510.1694114301, rtol=1e-6)
    np.testing.assert_allclose(F[3, 17], 2632.5986112380515, rtol=1e-6)
    np.testing.assert_allclose(F.max(), 6536.094169923113, rtol=1e-6)


def test_padding_and_shape_errors():
    F = extract_features(np.ones((20, 24, 16)))
    assert F.shape == (32, 3 * 3 * 2)
    with pytest.raises(ShapeError):
        extract_features(np.ones((3, 8, 8)))
    with pytest.raises(ShapeError):
        extract_features(np.ones((8, 8)))


def test_gram_hand_cases():
    np.testing.assert_array_equal(gram_matrix([[1, 0], [0, 1]]), [[1, 0], [0, 1]])
    np.testing.assert_array_equal(gram_matrix([[1, 2], [3, 4]]), [[5, 11], [11, 25]])


def test_fuse_hand_cases():
    F = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(fuse(np.array([[5.0, 11.0], [11.0, 25.0]]), F), [38, 54, 86, 122])
    np.testing.assert_array_equal(fuse(np.eye(2), F), F.ravel())
    assert not fuse(np.eye(2), np.zeros((2, 5))).any()
    with pytest.raises(ShapeError):
        fuse(np.eye(3), F)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 6), st.integers(1, 10)), elements=finite))
def test_gram_symmetric_psd(F):
    M = gram_matrix(F)
    assert np.array_equal(M, M.T)
    scale = max(1.0, np.abs(M).max())
    assert np.linalg.eigvalsh(M).min() >= -1e-8 * scale
    assert np.all(np.diag(M) >= 0)
    assert np.array_equal(fuse(np.eye(len(F)), F), F.ravel())


def test_mirror_invariance_of_gram():
    vol = synthesize_volume(CANONICAL_DISEASES[3], 9)
    F = extract_features(vol)
    Fm = extract_features(vol.data[:, :, ::-1])
    assert not np.allclose(F, Fm)
    M, Mm = gram_matrix(F), gram_matrix(Fm)
    np.testing.assert_allclose(Mm, M, rtol=1e-6)


def test_unsymmetric_bank_breaks_mirror_invariance():
    bank = FilterBank.build(symmetric=False)
    vol = synthesize_volume(CANONICAL_DISEASES[3], 9)
    M = gram_matrix(extract_features(vol, bank))
    Mm = gram_matrix(extract_features(vol.data[:, :, ::-1], bank))
    assert not np.allclose(M, Mm, rtol=1e-6)


def test_describe_deterministic_and_finite():
    cfg = CANONICAL_DISEASES[4]
    a = describe(synthesize_volume(cfg, 5))
    b = describe(synthesize_volume(cfg, 5))
    assert a.shape == (2048,)
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a))


def test_inter_class_distance_exceeds_intra():
    d1 = [describe(synthesize_volume(CANONICAL_DISEASES[0], 100 + i)) for i in range(50)]
    d5 = [describe(synthesize_volume(CANONICAL_DISEASES[4], 200 + i)) for i in range(50)]
    intra = 0.5 * (mean_pairwise_bruteforce(d1) + mean_pairwise_bruteforce(d5))
    inter = np.mean([np.linalg.norm(a - b) for a in d1 for b in d5])
    assert inter > intra


def test_extractor_estimator():
    vols = np.stack([synthesize_volume(CANONICAL_DISEASES[0], s).data for s in range(3)])
    ext = GramFeatureExtractor().fit(vols)
    X = ext.transform(vols)
    assert X.shape == (3, 2048)
    np.testing.assert_array_equal(X[1], describe(vols[1]))
    assert GramFeatureExtractor(variant="gram").fit().transform(vols).shape == (3, 32 * 32)
    assert GramFeatureExtractor(variant="raw").fit().transform(vols[0]).shape == (1, 2048)
    assert ext.get_params()["variant"] == "fused"
    with pytest.raises(ValueError):
        GramFeatureExtractor(variant="bogus").fit()
