import math

import numpy as np
import pytest

from oracles import dilate_sets
from uncage.exceptions import InvalidArgumentError
from uncage.fusion import CageMaskSegmenter, FusionParams, dilate, fuse, sigmoid

DEFAULT = FusionParams(confidence_boost=0.4, mask_threshold=0.3)


def test_sigmoid_values(rng):
    assert sigmoid(0.0) == 0.5
    assert sigmoid(10.0) == pytest.approx(1.0 / (1.0 + math.exp(-10.0)), rel=1e-15)
    assert sigmoid(10.0) == pytest.approx(0.9999546, abs=1e-7)
    x = rng.normal(scale=8, size=1000)
    np.testing.assert_allclose(sigmoid(x), 1.0 - sigmoid(-x), atol=1e-15)
    assert np.isfinite(sigmoid(np.array([-800.0, 800.0]))).all()


@pytest.mark.parametrize("pb,c,expect_p,expect_m", [
    (0.2, 0.5, 0.4, True),
    (0.25, 0.0, 0.25, False),
    (0.9, 1.0, 1.0, True),
])
def test_default_constant_examples(pb, c, expect_p, expect_m):
    p, m = fuse(np.full((1, 1), pb), np.full((1, 1), c), DEFAULT)
    assert p[0, 0] == expect_p
    assert bool(m[0, 0]) is expect_m


def test_threshold_is_strict():
    p, m = fuse(np.full((1, 1), 0.3), np.zeros((1, 1)), DEFAULT)
    assert p[0, 0] == 0.3 and not m[0, 0]


def test_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        fuse(np.zeros((3, 3)), np.zeros((3, 4)))


@pytest.mark.parametrize("kw", [dict(confidence_boost=-0.1), dict(mask_threshold=0.0),
                                dict(mask_threshold=1.0), dict(dilate_kernel=4),
                                dict(dilate_iterations=-1)])
def test_params_validation(kw):
    with pytest.raises(InvalidArgumentError):
        FusionParams(**kw)


def test_monotone_in_confidence(rng):
    pb = rng.random((100, 100))
    c = rng.random((100, 100))
    _, m0 = fuse(pb, c, DEFAULT)
    raised = np.clip(c + rng.random((100, 100)) * (1 - c), 0, 1)
    _, m1 = fuse(pb, raised, DEFAULT)
    assert not np.any(m0 & ~m1)


def test_zero_boost_is_plain_threshold(rng):
    pb, c = rng.random((50, 50)), rng.random((50, 50))
    p, m = fuse(pb, c, FusionParams(confidence_boost=0.0, mask_threshold=0.3))
    assert np.array_equal(p, pb) and np.array_equal(m, pb > 0.3)


def test_pointwise_permutation(rng):
    pb, c = rng.random((20, 20)), rng.random((20, 20))
    perm = rng.permutation(400)
    p, m = fuse(pb, c, DEFAULT)
    pp, mp = fuse(pb.ravel()[perm].reshape(20, 20), c.ravel()[perm].reshape(20, 20), DEFAULT)
    assert np.array_equal(pp.ravel(), p.ravel()[perm]) and np.array_equal(mp.ravel(), m.ravel()[perm])


def test_dilate_examples():
    m = np.zeros((7, 7), bool)
    m[3, 3] = True
    out = dilate(m, 3, 1)
    assert out.sum() == 9 and out[2:5, 2:5].all()
    assert not dilate(np.zeros((5, 5), bool), 3, 2).any()
    assert np.array_equal(dilate(m, 5, 0), m)
    with pytest.raises(InvalidArgumentError):
        dilate(m, 4, 1)


@pytest.mark.parametrize("seed", range(5))
def test_dilate_against_set_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((16, 16)) < 0.1
    b = a | (rng.random((16, 16)) < 0.1)
    for k, it in [(3, 1), (3, 2), (5, 1), (1, 3)]:
        da = dilate(a, k, it)
        assert np.array_equal(da, dilate_sets(a, k, it))
        assert not np.any(a & ~da)
        assert not np.any(da & ~dilate(b, k, it))
    assert np.array_equal(dilate(a, 3, 2)[2:-2, 2:-2], dilate(a, 5, 1)[2:-2, 2:-2])


def test_segmenter_estimator(rng):
    img = rng.random((32, 32, 3))
    pb = rng.random((32, 32))
    seg = CageMaskSegmenter(n_orientations=8, confidence_boost=0.0)
    assert np.array_equal(seg.fit().predict(img, pb), pb > 0.3)
    logits = rng.normal(size=(32, 32))
    seg2 = CageMaskSegmenter(n_orientations=8, confidence_boost=0.0, logits=True)
    assert np.array_equal(seg2.predict(img, logits), sigmoid(logits) > 0.3)
    assert seg.get_params()["mask_threshold"] == 0.3
