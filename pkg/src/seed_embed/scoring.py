"""Cosine scoring of trial lists, EER and normalized minDCF.

Higher scores mean "same speaker".  At threshold ``th`` a trial is accepted
when ``score >= th``, so::

    FAR(th) = #{nontarget >= th} / #nontarget
    FRR(th) = #{target < th} / #target

Both metrics sweep the sorted unique scores plus ``+inf`` (reject all).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class Trial:
    label: int  # 1 target, 0 nontarget
    id_a: str
    id_b: str
    lineno: int = 0


@dataclass
class ScoreSet:
    scores: np.ndarray
    labels: np.ndarray  # bool, True = target

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(bool)
        if self.scores.shape != self.labels.shape or self.scores.ndim != 1:
            raise DataError("scores and labels must be 1-d arrays of equal length")

    @property
    def targets(self) -> np.ndarray:
        return self.scores[self.labels]

    @property
    def nontargets(self) -> np.ndarray:
        return self.scores[~self.labels]


@dataclass(frozen=True)
class DcfParams:
    c_miss: float = 1.0
    c_fa: float = 1.0
    p_target: float = 0.05

    def __post_init__(self):
        if self.c_miss <= 0:
            raise ConfigError("c_miss", "must be > 0")
        if self.c_fa <= 0:
            raise ConfigError("c_fa", "must be > 0")
        if not (0.0 < self.p_target < 1.0):
            raise ConfigError("p_target", f"must lie in (0, 1), got {self.p_target}")

    @property
    def normalizer(self) -> float:
        return min(self.c_miss * self.p_target, self.c_fa * (1.0 - self.p_target))


def cosine_score(a, b, ids: tuple[str, str] = ("a", "b")) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0:
        raise DataError(f"zero-norm embedding for utterance {ids[0]!r}")
    if nb == 0:
        raise DataError(f"zero-norm embedding for utterance {ids[1]!r}")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _rates(s: ScoreSet):
    tgt = np.sort(s.targets)
    non = np.sort(s.nontargets)
    if tgt.size == 0 or non.size == 0:
        raise DataError("need at least one target and one nontarget trial")
    thresholds = np.append(np.unique(s.scores), np.inf)
    frr = np.searchsorted(tgt, thresholds, side="left") / tgt.size
    far = (non.size - np.searchsorted(non, thresholds, side="left")) / non.size
    return thresholds, far, frr


def compute_eer(s: ScoreSet) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Picks the threshold minimizing ``|FAR - FRR|`` (lowest on ties) and
    reports ``(FAR + FRR) / 2`` there.
    """
    thresholds, far, frr = _rates(s)
    i = int(np.argmin(np.abs(far - frr)))  # argmin returns the first, i.e. lowest, tie
    return float((far[i] + frr[i]) / 2), float(thresholds[i])


def compute_min_dcf(s: ScoreSet, p: DcfParams = DcfParams()) -> tuple[float, float]:
    """Minimum normalized detection cost and its threshold."""
    thresholds, far, frr = _rates(s)
    dcf = p.c_miss * p.p_target * frr + p.c_fa * (1.0 - p.p_target) * far
    i = int(np.argmin(dcf))
    return float(dcf[i] / p.normalizer), float(thresholds[i])


# --------------------------------------------------------------------------
# trials
# --------------------------------------------------------------------------

def read_trials(path) -> list[Trial]:
    """Parse ``<label> <id_a> <id_b>`` lines; ``#`` starts a comment."""
    trials = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in ("0", "1"):
            raise DataError(f"{path}:{lineno}: expected '<0|1> <id_a> <id_b>', got {line!r}")
        trials.append(Trial(int(parts[0]), parts[1], parts[2], lineno))
    return trials


def write_trials(path, trials: Sequence[Trial]) -> None:
    Path(path).write_text("".join(f"{t.label} {t.id_a} {t.id_b}\n" for t in trials))


def score_trials(embeddings: Mapping[str, np.ndarray], trials: Sequence[Trial],
                 embeddings_b: Mapping[str, np.ndarray] | None = None) -> ScoreSet:
    """Cosine-score every trial in order.

    ``id_b`` is looked up in ``embeddings_b`` when given, else in ``embeddings``.
    """
    if embeddings_b is None:
        embeddings_b = embeddings
    scores = np.empty(len(trials))
    for i, tr in enumerate(trials):
        where = f"line {tr.lineno}" if tr.lineno else f"trial {i}"
        if tr.id_a not in embeddings:
            raise DataError(f"{where}: unknown utterance id {tr.id_a!r}")
        if tr.id_b not in embeddings_b:
            raise DataError(f"{where}: unknown utterance id {tr.id_b!r}")
        scores[i] = cosine_score(embeddings[tr.id_a], embeddings_b[tr.id_b], (tr.id_a, tr.id_b))
    return ScoreSet(scores, np.array([t.label == 1 for t in trials], dtype=bool))


def all_pair_trials(ids_a: Sequence[str], ids_b: Sequence[str], speaker_of: Mapping[str, int],
                    key_b=None, skip_same: bool = True) -> list[Trial]:
    """Every ``(a, b)`` combination labelled by speaker identity.

    When ``ids_a is ids_b`` only ``a < b`` pairs are emitted.  ``key_b`` maps
    an id of the second list to its utterance id for labelling and
    same-utterance skipping (e.g. ``"utt#noisy1" -> "utt"``).
    """
    key_b = key_b or (lambda x: x)
    trials = []
    symmetric = ids_a is ids_b
    for i, a in enumerate(ids_a):
        for j, b in enumerate(ids_b):
            if symmetric and j <= i:
                continue
            ub = key_b(b)
            if skip_same and a == ub:
                continue
            trials.append(Trial(int(speaker_of[a] == speaker_of[ub]), a, b))
    return trials
