import numpy as np
import pytest

from seed_embed.corpus import (
    SynthConfig,
    generate_corpus,
    read_corpus_dir,
    read_embedding_file,
    write_corpus_dir,
    write_embedding_file,
)
from seed_embed.errors import ConfigError, DataError
from seed_embed.pipeline import heldout_embeddings
from seed_embed.scoring import all_pair_trials, compute_eer, score_trials


def test_same_seed_is_bit_identical():
    a, b = generate_corpus(SynthConfig(seed=5)), generate_corpus(SynthConfig(seed=5))
    for ga, gb in zip(a.groups, b.groups):
        assert ga.clean.tobytes() == gb.clean.tobytes()
        assert ga.noisy.tobytes() == gb.noisy.tobytes()
    assert a.split == b.split


def test_different_seeds_differ():
    a, b = generate_corpus(SynthConfig(seed=1)), generate_corpus(SynthConfig(seed=2))
    assert not np.array_equal(a.groups[0].clean, b.groups[0].clean)


def test_clean_embeddings_are_unit_norm():
    c = generate_corpus(SynthConfig())
    norms = np.linalg.norm(np.stack([g.clean for g in c.groups]), axis=1)
    np.testing.assert_allclose(norms, 1.0, rtol=1e-6)


def test_zero_within_speaker_spread():
    c = generate_corpus(SynthConfig(within_speaker_sigma=0.0, utts_per_speaker=4))
    spk0 = [g.clean for g in c.groups if c.speaker_of[g.group_id] == 0]
    for v in spk0[1:]:
        np.testing.assert_array_equal(v, spk0[0])


def test_no_perturbation_means_noisy_equals_clean():
    c = generate_corpus(SynthConfig(env_gain_range=(0.0, 0.0), iso_noise_sigma=0.0))
    for g in c.groups:
        np.testing.assert_array_equal(g.noisy, np.tile(g.clean, (g.n_variants, 1)))


def test_variants_differ():
    c = generate_corpus(SynthConfig(variants=3))
    for g in c.groups:
        assert not np.array_equal(g.noisy[0], g.noisy[1])


@pytest.mark.parametrize("frac", [0.1, 0.2, 0.33, 0.5])
def test_split_is_disjoint_exhaustive_and_sized(frac):
    c = generate_corpus(SynthConfig(holdout_fraction=frac, utts_per_speaker=7))
    ids = {g.group_id for g in c.groups}
    assert len(ids) == len(c.groups)
    assert set(c.split) == ids
    n_hold = sum(v == "holdout" for v in c.split.values())
    assert abs(n_hold - frac * len(ids)) <= 1


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_speakers=1), dict(within_speaker_sigma=-1.0), dict(env_gain_range=(0.9, 0.3)),
     dict(holdout_fraction=1.0), dict(variants=0)],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        SynthConfig(**kwargs)


def test_mismatch_degrades_raw_eer():
    c = generate_corpus(SynthConfig(dim=16, n_speakers=20, utts_per_speaker=10))
    clean, noisy = heldout_embeddings(c)
    ids = list(clean)
    cc = score_trials(clean, all_pair_trials(ids, ids, c.speaker_of))
    cn = score_trials(clean, all_pair_trials(ids, list(noisy), c.speaker_of, key_b=lambda x: x.split("#")[0]),
                      noisy)
    assert compute_eer(cc)[0] < compute_eer(cn)[0]


# --------------------------------------------------------------------------
# EMB1
# --------------------------------------------------------------------------

def test_embedding_file_round_trip(tmp_path, rng):
    ids = ["a", "utt-ü", "x" * 300]
    emb = rng.normal(size=(3, 7)).astype(np.float32)
    write_embedding_file(tmp_path / "e.emb", ids, emb)
    rid, remb = read_embedding_file(tmp_path / "e.emb")
    assert rid == ids
    assert remb.tobytes() == emb.tobytes()


def test_embedding_file_layout(tmp_path):
    write_embedding_file(tmp_path / "e.emb", ["ab"], np.array([[1.0, -2.0]], np.float32))
    raw = (tmp_path / "e.emb").read_bytes()
    assert raw[:4] == b"EMB1"
    assert raw[4:16] == bytes([1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0])
    assert raw[16:18] == b"\x02\x00" and raw[18:20] == b"ab"
    assert np.frombuffer(raw[20:], "<f4").tolist() == [1.0, -2.0]


def test_truncated_file_reports_byte_counts(tmp_path, rng):
    p = tmp_path / "e.emb"
    write_embedding_file(p, ["a", "b"], rng.normal(size=(2, 4)))
    full = p.read_bytes()
    p.write_bytes(full[:-3])
    with pytest.raises(DataError, match=f"expected at least {len(full)} bytes, got {len(full) - 3}"):
        read_embedding_file(p)


def test_bad_magic_and_trailing_bytes(tmp_path, rng):
    p = tmp_path / "e.emb"
    write_embedding_file(p, ["a"], rng.normal(size=(1, 4)))
    good = p.read_bytes()
    p.write_bytes(b"EMB2" + good[4:])
    with pytest.raises(DataError, match="bad magic"):
        read_embedding_file(p)
    p.write_bytes(good + b"\x00")
    with pytest.raises(DataError, match="trailing"):
        read_embedding_file(p)
    p.write_bytes(good[:7])
    with pytest.raises(DataError, match="truncated header"):
        read_embedding_file(p)


def test_dimension_mismatch_against_expected(tmp_path, rng):
    p = tmp_path / "e.emb"
    write_embedding_file(p, ["a"], rng.normal(size=(1, 256)))
    with pytest.raises(DataError, match="dimension mismatch"):
        read_embedding_file(p, expected_dim=512)


def test_duplicate_ids_rejected(tmp_path, rng):
    with pytest.raises(DataError, match="duplicate"):
        write_embedding_file(tmp_path / "e.emb", ["a", "a"], rng.normal(size=(2, 3)))


def test_corpus_dir_round_trip(tmp_path):
    c = generate_corpus(SynthConfig(dim=8, n_speakers=3, utts_per_speaker=4))
    write_corpus_dir(tmp_path, c)
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "clean.emb", "noisy_0.emb", "noisy_1.emb", "noisy_2.emb", "speakers.tsv", "split.tsv"]
    back = read_corpus_dir(tmp_path)
    assert back.speaker_of == c.speaker_of
    assert back.split == c.split
    for a, b in zip(c.groups, back.groups):
        assert a.group_id == b.group_id
        assert a.noisy.tobytes() == b.noisy.tobytes()
