"""Synthetic environment-mismatch corpora and the EMB1 embedding file format.

The generator places speakers as unit vectors on the D-sphere, scatters
clean utterances around them and derives each noisy variant by shifting the
clean embedding along one of a few fixed "environment" directions plus a
little isotropic noise.

EMB1 layout (little-endian)::

    b"EMB1" | u32 version=1 | u32 dim | u32 count
    count x ( u16 id_len | id_len bytes UTF-8 id | dim x f32 )
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .training import PairGroup

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1
_HEADER = struct.Struct("<4sIII")


@dataclass
class SynthConfig:
    dim: int = 16
    n_speakers: int = 20
    utts_per_speaker: int = 10
    variants: int = 3
    within_speaker_sigma: float = 0.08
    n_environments: int = 8
    env_gain_range: tuple[float, float] = (0.3, 0.9)
    iso_noise_sigma: float = 0.05
    seed: int = 0
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim", f"must be >= 1, got {self.dim}")
        if self.n_speakers < 2:
            raise ConfigError("n_speakers", f"must be >= 2, got {self.n_speakers}")
        if self.utts_per_speaker < 1:
            raise ConfigError("utts_per_speaker", f"must be >= 1, got {self.utts_per_speaker}")
        if self.variants < 1:
            raise ConfigError("variants", f"must be >= 1, got {self.variants}")
        if self.n_environments < 1:
            raise ConfigError("n_environments", f"must be >= 1, got {self.n_environments}")
        for name in ("within_speaker_sigma", "iso_noise_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        lo, hi = self.env_gain_range
        if lo > hi:
            raise ConfigError("env_gain_range", f"low {lo} exceeds high {hi}")
        if not (0.0 < self.holdout_fraction < 1.0):
            raise ConfigError("holdout_fraction", f"must lie in (0, 1), got {self.holdout_fraction}")


@dataclass
class LabeledCorpus:
    """Groups plus speaker labels and split; training only ever sees ``groups``."""

    groups: list[PairGroup]
    speaker_of: dict[str, int] = field(default_factory=dict)
    split: dict[str, str] = field(default_factory=dict)

    def subset(self, which: str) -> list[PairGroup]:
        return [g for g in self.groups if self.split.get(g.group_id) == which]


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def generate_corpus(c: SynthConfig) -> LabeledCorpus:
    """Draw a synthetic mismatch corpus; bit-identical for a given ``c.seed``."""
    rng = np.random.default_rng(c.seed)
    D, S, U, N = c.dim, c.n_speakers, c.utts_per_speaker, c.variants
    centroids = _unit_rows(rng.standard_normal((S, D)))
    env_dirs = _unit_rows(rng.standard_normal((c.n_environments, D)))

    clean = _unit_rows(
        centroids[:, None, :] + c.within_speaker_sigma * rng.standard_normal((S, U, D))
    ).reshape(S * U, D)
    lo, hi = c.env_gain_range
    gains = rng.uniform(lo, hi, size=(S * U, N))
    envs = rng.integers(0, c.n_environments, size=(S * U, N))
    iso = c.iso_noise_sigma * rng.standard_normal((S * U, N, D))
    noisy = clean[:, None, :] + gains[..., None] * env_dirs[envs] + iso

    n_total = S * U
    n_hold = int(round(c.holdout_fraction * n_total))
    held = set(rng.permutation(n_total)[:n_hold].tolist())

    groups, speaker_of, split = [], {}, {}
    for i in range(n_total):
        gid = f"spk{i // U:03d}_utt{i % U:03d}"
        groups.append(PairGroup(clean[i].astype(np.float32), noisy[i].astype(np.float32), gid))
        speaker_of[gid] = i // U
        split[gid] = "holdout" if i in held else "train"
    return LabeledCorpus(groups, speaker_of, split)


# --------------------------------------------------------------------------
# EMB1 files
# --------------------------------------------------------------------------

def write_embedding_file(path, ids: Sequence[str], embeddings) -> None:
    emb = np.asarray(embeddings, dtype="<f4")
    if emb.ndim != 2 or emb.shape[0] != len(ids):
        raise DataError(f"need a (count, dim) array matching {len(ids)} ids, got {emb.shape}")
    if len(set(ids)) != len(ids):
        raise DataError("duplicate utterance ids")
    if not np.all(np.isfinite(emb)):
        raise DataError("embeddings contain non-finite values")
    parts = [_HEADER.pack(EMB_MAGIC, EMB_VERSION, emb.shape[1], emb.shape[0])]
    for uid, row in zip(ids, emb):
        raw = uid.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DataError(f"id too long ({len(raw)} bytes): {uid[:40]}...")
        parts += [struct.pack("<H", len(raw)), raw, row.tobytes()]
    Path(path).write_bytes(b"".join(parts))


def read_embedding_file(path, expected_dim: int | None = None):
    """Return ``(ids, embeddings)`` with embeddings ``(count, dim)`` float32."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: truncated header: expected {_HEADER.size} bytes, got {len(data)}")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != EMB_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r} at offset 0, expected {EMB_MAGIC!r}")
    if version != EMB_VERSION:
        raise DataError(f"{path}: unsupported version {version} at offset 4")
    if dim < 1:
        raise DataError(f"{path}: invalid dim {dim} at offset 8")
    if expected_dim is not None and dim != expected_dim:
        raise DataError(f"{path}: embedding dimension mismatch: file has {dim}, expected {expected_dim}")
    pos = _HEADER.size
    ids = []
    emb = np.empty((count, dim), dtype=np.float32)
    rec = 4 * dim
    for i in range(count):
        if pos + 2 > len(data):
            raise DataError(
                f"{path}: truncated at record {i} (offset {pos}): expected at least "
                f"{pos + 2} bytes, got {len(data)}"
            )
        (n,) = struct.unpack_from("<H", data, pos)
        end = pos + 2 + n + rec
        if end > len(data):
            raise DataError(
                f"{path}: truncated at record {i} (offset {pos}): expected at least "
                f"{end} bytes, got {len(data)}"
            )
        try:
            uid = data[pos + 2:pos + 2 + n].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: record {i} (offset {pos + 2}): id is not UTF-8") from exc
        ids.append(uid)
        emb[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=pos + 2 + n)
        pos = end
    if pos != len(data):
        raise DataError(f"{path}: {len(data) - pos} trailing bytes after {count} records (offset {pos})")
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate utterance ids")
    return ids, emb


# --------------------------------------------------------------------------
# corpus directories
# --------------------------------------------------------------------------

def write_corpus_dir(out_dir, corpus: LabeledCorpus) -> None:
    """``clean.emb``, ``noisy_<k>.emb``, ``speakers.tsv`` and ``split.tsv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = [g.group_id for g in corpus.groups]
    write_embedding_file(out / "clean.emb", ids, np.stack([g.clean for g in corpus.groups]))
    N = corpus.groups[0].n_variants
    for k in range(N):
        write_embedding_file(out / f"noisy_{k}.emb", ids, np.stack([g.noisy[k] for g in corpus.groups]))
    (out / "speakers.tsv").write_text("".join(f"{i}\t{corpus.speaker_of[i]}\n" for i in ids))
    (out / "split.tsv").write_text("".join(f"{i}\t{corpus.split[i]}\n" for i in ids))


def _read_tsv(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 tab-separated fields")
        out[parts[0]] = parts[1]
    return out


def read_corpus_dir(in_dir) -> LabeledCorpus:
    """Inverse of :func:`write_corpus_dir`; label files are optional."""
    d = Path(in_dir)
    if not (d / "clean.emb").exists():
        raise DataError(f"{d}: no clean.emb")
    ids, clean = read_embedding_file(d / "clean.emb")
    noisy_files = sorted(d.glob("noisy_*.emb"), key=lambda p: int(p.stem.split("_")[1]))
    if not noisy_files:
        raise DataError(f"{d}: no noisy_<k>.emb files")
    noisy = []
    for p in noisy_files:
        nid, arr = read_embedding_file(p, expected_dim=clean.shape[1])
        if nid != ids:
            raise DataError(f"{p}: ids do not match clean.emb")
        noisy.append(arr)
    noisy = np.stack(noisy, axis=1)
    groups = [PairGroup(clean[i], noisy[i], uid) for i, uid in enumerate(ids)]
    speaker_of = {}
    if (d / "speakers.tsv").exists():
        speaker_of = {k: int(v) for k, v in _read_tsv(d / "speakers.tsv").items()}
    split = {}
    if (d / "split.tsv").exists():
        split = _read_tsv(d / "split.tsv")
    return LabeledCorpus(groups, speaker_of, split)
