import filecmp

import numpy as np
import pytest

from csiorient.dataset import SplitSpec, load, split
from csiorient.errors import ConfigError
from csiorient.synth import SynthConfig, activity_signature, orientation_profile, synth_generate


def test_paper_shape_counts():
    cfg = SynthConfig.paper_shape(seed=7)
    assert cfg.samples_per_ap == 20 * 4 * 4 * 6 == 1920
    assert cfg.A == 5


@pytest.mark.parametrize("field", ["S", "A", "users", "samples_per_cell"])
def test_counts_must_be_positive(field):
    with pytest.raises(ConfigError, match=field):
        SynthConfig(**{field: 0})


def test_generated_directory_is_byte_identical(tmp_path, small_cfg):
    synth_generate(small_cfg, tmp_path / "a")
    synth_generate(small_cfg, tmp_path / "b")
    for sub in ["."] + [f"ap{a}" for a in range(1, small_cfg.A + 1)]:
        cmp = filecmp.dircmp(tmp_path / "a" / sub, tmp_path / "b" / sub)
        assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
        _, mismatch, errors = filecmp.cmpfiles(
            tmp_path / "a" / sub, tmp_path / "b" / sub, cmp.common_files, shallow=False
        )
        assert not mismatch and not errors


def test_disk_copy_equals_memory(small_dir, small_dataset):
    back = load(small_dir)
    assert back.sample_ids == small_dataset.sample_ids
    for s in small_dataset.samples:
        assert np.array_equal(back.get(s.sample_id, s.ap_id).amplitudes, s.amplitudes)


def test_amplitudes_non_negative_and_labels_balanced(small_dataset, small_cfg):
    assert all((s.amplitudes >= 0).all() for s in small_dataset.samples)
    a, o = small_dataset.labels()
    counts = np.bincount(a * 4 + o, minlength=16)
    assert (counts == small_cfg.users * small_cfg.samples_per_cell).all()


def test_noise_free_cells_differ_only_by_jitter():
    cfg = SynthConfig(S=4, T=64, A=2, users=1, samples_per_cell=3, noise_std=0.0, seed=1)
    ds = synth_generate(cfg)
    same_cell = [s for s in ds.for_ap(1) if (s.activity, s.orientation) == (2, 1)]
    assert len(same_cell) == 3
    d = np.abs(same_cell[0].amplitudes - same_cell[1].amplitudes)
    assert d.max() > 0
    assert d.mean() < 0.02 * same_cell[0].amplitudes.mean()
    again = synth_generate(cfg)
    assert all(np.array_equal(x.amplitudes, y.amplitudes) for x, y in zip(ds.samples, again.samples))


def test_each_ap_sees_distinct_orientation_profiles():
    for component in range(3):
        table = np.array([[orientation_profile(a, o)[component] for o in range(4)] for a in range(5)])
        for row in table:
            assert len(set(row)) == 4
    # the gain table is a Latin square over the first four APs
    gains = np.array([[orientation_profile(a, o)[0] for o in range(4)] for a in range(4)])
    assert all(len(set(col)) == 4 for col in gains.T)


def test_signatures_unit_rms():
    t = np.linspace(0, 1, 8192, endpoint=False)
    for a in range(4):
        assert np.sqrt(np.mean(activity_signature(a, t) ** 2)) == pytest.approx(1.0, abs=1e-3)


def test_nearest_centroid_separates_activities_without_noise():
    cfg = SynthConfig(A=5, users=6, samples_per_cell=5, noise_std=0.0, seed=3)
    ds = synth_generate(cfg)
    train, test = split(ds, SplitSpec(0.8, 0))
    for a in ds.ap_ids:
        Xtr = np.stack([s.amplitudes.ravel() for s in train.for_ap(a)])
        ytr = train.labels()[0]
        Xte = np.stack([s.amplitudes.ravel() for s in test.for_ap(a)])
        yte = test.labels()[0]
        C = np.stack([Xtr[ytr == c].mean(axis=0) for c in range(4)])
        d = ((Xte[:, None, :] - C[None]) ** 2).sum(axis=-1)
        assert (d.argmin(axis=1) == yte).all(), f"AP {a}"
