import json
import os

import numpy as np
import pytest

from uncage.assets import bar_cage, flat_animal
from uncage.exceptions import InvalidArgumentError
from uncage.io import read_image, read_mask, write_image, write_json
from uncage.rng import Xorshift64Star, derive_seed
from uncage.synth import (SynthConfig, alpha_blend, compose, generate_dataset, split_for,
                          transform_keypoints, zoom_crop_or_pad)

NO_AUG = dict(zoom_range=(1.0, 1.0), brightness_range=(0.0, 0.0),
              contrast_range=(1.0, 1.0), saturation_range=(1.0, 1.0))


def test_blend_endpoints_bit_exact(rng):
    cage, animal = rng.random((8, 8, 3)), rng.random((8, 8, 3))
    assert np.array_equal(alpha_blend(cage, animal, np.ones((8, 8))), cage)
    assert np.array_equal(alpha_blend(cage, animal, np.zeros((8, 8))), animal)


def test_blend_arithmetic():
    out = alpha_blend(np.full((1, 1, 3), 0.8), np.full((1, 1, 3), 0.4), np.full((1, 1), 0.25))
    np.testing.assert_allclose(out, 0.5, atol=1e-15)


def test_blend_convex(rng):
    cage, animal = rng.random((64, 64, 3)), rng.random((64, 64, 3))
    a = rng.random((64, 64))
    out = alpha_blend(cage, animal, a)
    assert np.all(out >= np.minimum(cage, animal)) and np.all(out <= np.maximum(cage, animal))
    np.testing.assert_allclose(out, a[..., None] * cage + (1 - a[..., None]) * animal, atol=1e-15)


def test_compose_mask_and_endpoints(rng):
    animal = rng.random((20, 30, 3))
    cage = np.zeros((20, 30, 4))
    cage[..., :3] = 0.6
    cage[:, 10:15, 3] = 1.0
    cage[:, 15, 3] = 0.3
    cfg = SynthConfig(target_w=30, target_h=20, **NO_AUG)
    img, mask, rec, animal_rs = compose(animal, cage, cfg, Xorshift64Star(1))
    assert np.array_equal(mask, cage[..., 3] > 0)
    assert np.array_equal(img[:, 10:15], cage[:, 10:15, :3])
    assert np.array_equal(img[~mask], animal[~mask])
    assert rec["zoom"] == 1.0 and np.array_equal(animal_rs, animal)


def test_compose_requires_alpha(rng):
    cfg = SynthConfig(target_w=8, target_h=8)
    with pytest.raises(InvalidArgumentError):
        compose(rng.random((8, 8, 3)), rng.random((8, 8, 3)), cfg, Xorshift64Star(0))


def test_zoom_keeps_alpha_and_colour_aligned():
    cage = bar_cage(64, 48, spacing=16, bar_width=6)
    z = zoom_crop_or_pad(cage, 1.5)
    assert z.shape == cage.shape
    # colour is a function of the bar profile, so it must track alpha
    assert np.array_equal(zoom_crop_or_pad(cage, 1.0), cage)
    shrunk = zoom_crop_or_pad(cage, 0.5)
    assert shrunk[0, :, 3].max() == 0.0 and shrunk[24, 16:48, 3].max() > 0.9


@pytest.mark.parametrize("kw", [dict(post_aug_copies=0), dict(zoom_range=(1.2, 1.1)),
                                dict(alpha_gain=0.0), dict(val_fraction=1.5),
                                dict(cages_per_animal=0), dict(target_w=0)])
def test_config_validation(kw):
    with pytest.raises(InvalidArgumentError):
        SynthConfig(**kw)


def make_assets(tmp_path, n_animals=2, n_cages=1, size=(48, 32)):
    w, h = size
    adir, cdir = tmp_path / "animals", tmp_path / "cages"
    for i in range(n_animals):
        write_image(adir / f"animal{i}.png", flat_animal(w, h, seed=i))
    for i in range(n_cages):
        write_image(cdir / f"cage{i}.png", bar_cage(w, h, spacing=12, bar_width=4, angle_deg=15 * i))
    return adir, cdir


def test_generate_counts_and_files(tmp_path):
    adir, cdir = make_assets(tmp_path)
    cfg = SynthConfig(target_w=40, target_h=24, post_aug_copies=3, rng_seed=7)
    man = generate_dataset(adir, cdir, cfg, tmp_path / "out")
    assert len(man["samples"]) == 6
    on_disk = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert on_disk["samples"] == json.loads(json.dumps(man["samples"]))
    for rec in man["samples"]:
        for key in ("image", "mask", "clean"):
            arr = read_image(tmp_path / "out" / rec[key]) if key != "mask" else read_mask(tmp_path / "out" / rec[key])
            assert arr.shape[:2] == (24, 40)
    # splits are constant per animal
    by_animal = {}
    for rec in man["samples"]:
        by_animal.setdefault(rec["animal"], set()).add(rec["split"])
    assert all(len(s) == 1 for s in by_animal.values())


def tree_bytes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            p = os.path.join(dirpath, f)
            out[os.path.relpath(p, root)] = open(p, "rb").read()
    return out


def test_bytewise_reproducible(tmp_path):
    adir, cdir = make_assets(tmp_path, 2, 2)
    cfg = SynthConfig(target_w=40, target_h=24, post_aug_copies=2, rng_seed=7)
    generate_dataset(adir, cdir, cfg, tmp_path / "a")
    generate_dataset(adir, cdir, cfg, tmp_path / "b", jobs=3)
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a.keys() == b.keys() and all(a[k] == b[k] for k in a)
    generate_dataset(adir, cdir, SynthConfig(target_w=40, target_h=24, post_aug_copies=2, rng_seed=8),
                     tmp_path / "c")
    c = tree_bytes(tmp_path / "c")
    assert any(a[k] != c[k] for k in a if k.startswith("images"))


def test_emitted_masks_match_recomputed_alpha(tmp_path):
    adir, cdir = make_assets(tmp_path, 1, 2)
    cfg = SynthConfig(target_w=40, target_h=24, post_aug_copies=2, rng_seed=3)
    man = generate_dataset(adir, cdir, cfg, tmp_path / "out")
    for rec in man["samples"]:
        cage = read_image(rec["cage"])
        rng = Xorshift64Star(derive_seed(cfg.rng_seed, 0, rec["pair_index"]))
        _, mask, _, _ = compose(read_image(rec["animal"]), cage, cfg, rng)
        assert np.array_equal(read_mask(tmp_path / "out" / rec["mask"]), mask)
        # post-augmentation leaves masks alone: every copy of a pair shares it
    pairs = {}
    for rec in man["samples"]:
        pairs.setdefault(rec["pair_index"], []).append(read_mask(tmp_path / "out" / rec["mask"]))
    assert all(np.array_equal(m[0], x) for m in pairs.values() for x in m)


def test_selected_cages(tmp_path):
    adir, cdir = make_assets(tmp_path, 2, 3)
    cfg = SynthConfig(target_w=40, target_h=24, post_aug_copies=1, cages_per_animal=2)
    assert len(generate_dataset(adir, cdir, cfg, tmp_path / "out")["samples"]) == 4


def test_empty_inputs_and_unwritable(tmp_path):
    adir, cdir = make_assets(tmp_path)
    (tmp_path / "empty").mkdir()
    with pytest.raises(InvalidArgumentError):
        generate_dataset(tmp_path / "empty", cdir, SynthConfig(), tmp_path / "o")
    with pytest.raises(InvalidArgumentError):
        generate_dataset(tmp_path / "missing", cdir, SynthConfig(), tmp_path / "o")
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        generate_dataset(adir, cdir, SynthConfig(target_w=16, target_h=16), blocker / "out")


def test_keypoints_passthrough(tmp_path):
    adir, cdir = make_assets(tmp_path, 1, 1, size=(48, 32))
    write_json(adir / "animal0.json", {"instances": [{
        "keypoints": [[2.0, 2.0, 2], [24.0, 16.0, 1], [0, 0, 0]], "bbox": [0, 0, 48, 32]}]})
    cfg = SynthConfig(target_w=96, target_h=64, post_aug_copies=1, **NO_AUG)
    man = generate_dataset(adir, cdir, cfg, tmp_path / "out")
    kp = json.loads((tmp_path / "out" / man["samples"][0]["keypoints"]).read_text())
    inst = kp["frames"][0]["instances"][0]
    assert inst["bbox"] == [0.0, 0.0, 96.0, 64.0]
    assert inst["keypoints"][1] == [48.0, 32.0, 1] and inst["keypoints"][2][2] == 0


def test_transform_keypoints_demotes_near_mask():
    mask = np.zeros((10, 10), bool)
    mask[5, 5] = True
    inst = [{"keypoints": [[4, 4, 2], [1, 1, 2], [6, 6, 1]], "bbox": [0, 0, 10, 10]}]
    out = transform_keypoints(inst, 1.0, 1.0, mask)[0]["keypoints"]
    assert [k[2] for k in out] == [1, 2, 1]


def test_split_fraction():
    ids = [f"animal_{i}" for i in range(4000)]
    val = sum(split_for(i) == "val" for i in ids) / len(ids)
    assert abs(val - 0.2) < 0.03
    assert split_for("x", 0.0) == "train" and split_for("x", 1.0) == "val"
