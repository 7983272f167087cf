"""Synthetic end-to-end experiment: generate, train, enhance, score."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import LabeledCorpus, SynthConfig, generate_corpus
from .inference import InferenceConfig, enhance
from .network import ModelParams
from .schedule import NoiseSchedule, make_scaled_linear_schedule
from .scoring import DcfParams, all_pair_trials, compute_eer, compute_min_dcf, score_trials
from .training import TrainConfig, train

log = logging.getLogger(__name__)


@dataclass
class ConditionResult:
    name: str
    n_trials: int
    n_targets: int
    raw_eer: float
    enh_eer: float
    raw_dcf: float
    enh_dcf: float

    @property
    def rel_eer_change(self) -> float:
        """``(enhanced - raw) / raw``; 0 when both are 0, inf when only raw is 0."""
        if self.raw_eer == 0:
            return 0.0 if self.enh_eer == 0 else float("inf")
        return (self.enh_eer - self.raw_eer) / self.raw_eer


@dataclass
class PipelineResult:
    conditions: dict[str, ConditionResult]
    history: list[float]
    model: ModelParams = field(repr=False)
    schedule: NoiseSchedule = field(repr=False)

    def report(self) -> str:
        """Plain-text report: TSV metric table then ``key=value`` lines."""
        lines = ["condition\ttrials\ttargets\traw_eer_pct\tenh_eer_pct\traw_mindcf\tenh_mindcf"]
        for c in self.conditions.values():
            lines.append(
                f"{c.name}\t{c.n_trials}\t{c.n_targets}\t{100 * c.raw_eer:.4f}\t"
                f"{100 * c.enh_eer:.4f}\t{c.raw_dcf:.6f}\t{c.enh_dcf:.6f}"
            )
        lines.append(f"epochs={len(self.history)}")
        lines.append(f"first_epoch_loss={self.history[0]:.9g}")
        lines.append(f"final_epoch_loss={self.history[-1]:.9g}")
        for c in self.conditions.values():
            lines.append(f"{c.name}.rel_eer_change={c.rel_eer_change:.6f}")
        return "\n".join(lines) + "\n"


def heldout_embeddings(corpus: LabeledCorpus):
    """Held-out clean and noisy embedding maps; noisy ids are ``<utt>#noisy<k>``."""
    hold = corpus.subset("holdout")
    clean = {g.group_id: g.clean for g in hold}
    noisy = {f"{g.group_id}#noisy{k}": g.noisy[k] for g in hold for k in range(g.n_variants)}
    return clean, noisy


def _enhance_map(m, emb, s, cfg):
    ids = list(emb)
    out = enhance(m, np.stack([emb[i] for i in ids]), s, cfg)
    return dict(zip(ids, out))


def evaluate_conditions(corpus: LabeledCorpus, m: ModelParams, s: NoiseSchedule,
                        icfg: InferenceConfig, dcf: DcfParams = DcfParams()) -> dict[str, ConditionResult]:
    """Raw vs. enhanced EER/minDCF on held-out clean-clean and clean-noisy trials.

    Clean-noisy trials pair a clean utterance with a noisy variant of a
    different utterance.  Enhancement is applied to both sides of a trial.
    """
    clean, noisy = heldout_embeddings(corpus)
    ids = list(clean)
    enh_clean = _enhance_map(m, clean, s, icfg)
    enh_noisy = _enhance_map(m, noisy, s, icfg)
    conditions = {
        "clean_clean": (all_pair_trials(ids, ids, corpus.speaker_of), clean, clean, enh_clean, enh_clean),
        "clean_noisy": (
            all_pair_trials(ids, list(noisy), corpus.speaker_of, key_b=lambda x: x.split("#")[0]),
            clean, noisy, enh_clean, enh_noisy,
        ),
    }
    out = {}
    for name, (trials, ra, rb, ea, eb) in conditions.items():
        raw = score_trials(ra, trials, rb)
        enh = score_trials(ea, trials, eb)
        out[name] = ConditionResult(
            name, len(trials), int(raw.labels.sum()),
            compute_eer(raw)[0], compute_eer(enh)[0],
            compute_min_dcf(raw, dcf)[0], compute_min_dcf(enh, dcf)[0],
        )
    return out


def run_pipeline(synth: SynthConfig = SynthConfig(), tcfg: TrainConfig | None = None,
                 icfg: InferenceConfig = InferenceConfig(), dcf: DcfParams = DcfParams(),
                 beta_start: float | None = None, beta_end: float | None = None) -> PipelineResult:
    tcfg = tcfg or TrainConfig(N=synth.variants, seed=synth.seed)
    kw = {}
    if beta_start is not None:
        kw["beta_start"] = beta_start
    if beta_end is not None:
        kw["beta_end"] = beta_end
    s = make_scaled_linear_schedule(tcfg.T, **kw)
    corpus = generate_corpus(synth)
    model, history = train(corpus.subset("train"), tcfg, s)
    conditions = evaluate_conditions(corpus, model, s, icfg, dcf)
    return PipelineResult(conditions, history, model, s)
