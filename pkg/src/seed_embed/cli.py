"""Command-line entry point: ``seed-embed <subcommand> ...``.

Exit codes: 0 success, 1 usage/configuration error, 2 data or model error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (
    SynthConfig,
    generate_corpus,
    read_corpus_dir,
    read_embedding_file,
    write_corpus_dir,
    write_embedding_file,
)
from .errors import ConfigError, NumericError, SeedError
from .gradcheck import run_gradcheck
from .inference import InferenceConfig, enhance
from .pipeline import run_pipeline
from .schedule import (
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    format_schedule,
    make_scaled_linear_schedule,
)
from .scoring import DcfParams, all_pair_trials, compute_eer, compute_min_dcf, read_trials, score_trials, write_trials
from .training import TrainConfig, train

log = logging.getLogger("seed_embed")

GRADCHECK_TOL = 1e-5
PIPELINE_BATCH_GROUPS = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digests(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        p = Path(p)
        files = sorted(q for q in p.iterdir() if q.is_file()) if p.is_dir() else [p]
        for q in files:
            out[str(q)] = _sha256(q)
    return out


def _manifest(args, inputs, duration) -> str:
    lines = [f"subcommand={args.command}", f"version={__version__}"]
    for key, value in sorted(vars(args).items()):
        if key not in ("command", "func"):
            lines.append(f"config.{key}={value}")
    for path, digest in _digests(inputs).items():
        lines.append(f"input_sha256.{path}={digest}")
    lines.append(f"duration_seconds={duration:.3f}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# subcommands; each returns the list of input paths for the manifest
# --------------------------------------------------------------------------

def cmd_schedule(args):
    s = make_scaled_linear_schedule(args.T, args.beta_start, args.beta_end)
    if args.dump:
        sys.stdout.write(format_schedule(s))
    else:
        print(f"T={s.T} beta_1={s.beta[0]:.12g} beta_T={s.beta[-1]:.12g} "
              f"alpha_bar_T={s.alpha_bar[-1]:.12g}")
    return []


def _synth_config(args) -> SynthConfig:
    return SynthConfig(
        dim=args.dim, n_speakers=args.speakers, utts_per_speaker=args.utts,
        variants=args.variants, within_speaker_sigma=args.within_sigma,
        n_environments=args.envs, env_gain_range=(args.gain_low, args.gain_high),
        iso_noise_sigma=args.iso_sigma, seed=args.seed, holdout_fraction=args.holdout,
    )


def cmd_synth(args):
    corpus = generate_corpus(_synth_config(args))
    out = Path(args.out)
    write_corpus_dir(out, corpus)
    hold = [g.group_id for g in corpus.subset("holdout")]
    write_trials(out / "trials_clean_clean.txt", all_pair_trials(hold, hold, corpus.speaker_of))
    # use with --emb clean.emb --emb2 noisy_<k>.emb
    write_trials(out / "trials_clean_noisy.txt", all_pair_trials(hold, list(hold), corpus.speaker_of))
    print(f"wrote {len(corpus.groups)} groups x {corpus.groups[0].n_variants} variants to {out}")
    return []


def _train_config(args, **overrides) -> TrainConfig:
    kw = dict(
        epochs=args.epochs, lr=args.lr, weight_decay=args.wd, groups_per_batch=args.batch_groups,
        N=args.variants, T=args.T, seed=args.seed, loss_kind=args.loss,
        lr_schedule=args.lr_schedule, temb_dim=args.temb_dim, n_blocks=args.blocks,
        standardize=not args.no_standardize, max_seconds=args.max_seconds,
        deterministic=args.deterministic,
    )
    kw.update(overrides)
    return TrainConfig(**kw)


def cmd_train(args):
    corpus = read_corpus_dir(args.corpus)
    groups = corpus.subset("train") if corpus.split and not args.all_groups else corpus.groups
    if not groups:
        raise ConfigError("corpus", "no training groups after applying split.tsv")
    if groups[0].n_variants != args.variants:
        log.warning("corpus has %d noisy variants; --variants %d ignored",
                    groups[0].n_variants, args.variants)
    cfg = _train_config(args, N=groups[0].n_variants)
    s = make_scaled_linear_schedule(args.T, args.beta_start, args.beta_end)
    model, history = train(groups, cfg, s)
    save_checkpoint(args.out, model, s)
    Path(str(args.out) + ".history.tsv").write_text(
        "".join(f"{i + 1}\t{v:.9g}\n" for i, v in enumerate(history))
    )
    print(f"trained {len(history)} epochs on {len(groups)} groups: "
          f"loss {history[0]:.6g} -> {history[-1]:.6g}; wrote {args.out}")
    return [args.corpus]


def _infer_config(args) -> InferenceConfig:
    return InferenceConfig(t_infer=args.t, steps=args.steps, ensemble=args.ensemble,
                           noise_first=args.noise_first, seed=args.seed)


def cmd_enhance(args):
    model, s = load_checkpoint(args.model)
    ids, emb = read_embedding_file(args.inp, expected_dim=model.dim)
    out = enhance(model, emb, s, _infer_config(args))
    if not np.all(np.isfinite(out)):
        raise NumericError("enhanced embeddings contain non-finite values")
    write_embedding_file(args.out, ids, out)
    print(f"enhanced {len(ids)} embeddings -> {args.out}")
    return [args.model, args.inp]


def cmd_eval(args):
    ids, emb = read_embedding_file(args.emb)
    table = dict(zip(ids, emb))
    table_b = None
    inputs = [args.emb, args.trials]
    if args.emb2:
        ids2, emb2 = read_embedding_file(args.emb2, expected_dim=emb.shape[1])
        table_b = dict(zip(ids2, emb2))
        inputs.append(args.emb2)
    scores = score_trials(table, read_trials(args.trials), table_b)
    dcf = DcfParams(args.c_miss, args.c_fa, args.p_target)
    eer, th_eer = compute_eer(scores)
    min_dcf, th_dcf = compute_min_dcf(scores, dcf)
    print(f"EER={100 * eer:.4f} minDCF={min_dcf:.6f} threshold_eer={th_eer:.6f} threshold_dcf={th_dcf:.6f}")
    return inputs


def cmd_gradcheck(args):
    r = run_gradcheck(D=args.dim, E=args.temb_dim, seeds=tuple(range(args.seeds)))
    ok = r.max_rel_error <= GRADCHECK_TOL
    print(f"max_rel_error={r.max_rel_error:.3e} worst={r.worst_param} "
          f"checked={r.n_checked} tol={GRADCHECK_TOL:g} status={'PASS' if ok else 'FAIL'}")
    if not ok:
        raise NumericError(f"gradient check failed: {r.max_rel_error:.3e} > {GRADCHECK_TOL:g}")
    return []


def cmd_pipeline(args):
    synth = _synth_config(args)
    tcfg = _train_config(args, N=args.variants)
    icfg = _infer_config(args)
    dcf = DcfParams(args.c_miss, args.c_fa, args.p_target)
    result = run_pipeline(synth, tcfg, icfg, dcf, args.beta_start, args.beta_end)
    report = result.report()
    sys.stdout.write(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report)
        (out / "history.tsv").write_text(
            "".join(f"{i + 1}\t{v:.9g}\n" for i, v in enumerate(result.history))
        )
        save_checkpoint(out / "model.ckpt", result.model, result.schedule)
    return []


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _add_schedule_args(p, with_T=True):
    if with_T:
        p.add_argument("--T", type=int, default=1000)
    p.add_argument("--beta-start", type=float, default=DEFAULT_BETA_START)
    p.add_argument("--beta-end", type=float, default=DEFAULT_BETA_END)


def _add_synth_args(p):
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--speakers", type=int, default=20)
    p.add_argument("--utts", type=int, default=10)
    p.add_argument("--variants", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--within-sigma", type=float, default=0.08)
    p.add_argument("--envs", type=int, default=8)
    p.add_argument("--gain-low", type=float, default=0.3)
    p.add_argument("--gain-high", type=float, default=0.9)
    p.add_argument("--iso-sigma", type=float, default=0.05)
    p.add_argument("--holdout", type=float, default=0.2)


def _add_train_args(p, batch_groups):
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--wd", type=float, default=0.01)
    p.add_argument("--batch-groups", type=int, default=batch_groups)
    p.add_argument("--loss", choices=("mse", "l2"), default="mse")
    p.add_argument("--lr-schedule", choices=("constant", "linear"), default="constant")
    p.add_argument("--temb-dim", type=int, default=None)
    p.add_argument("--blocks", type=int, default=3)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--max-seconds", type=float, default=None)
    _add_schedule_args(p)


def _add_infer_args(p):
    p.add_argument("--t", type=int, default=50)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--ensemble", action="store_true")
    p.add_argument("--noise-first", action="store_true")


def _add_dcf_args(p):
    p.add_argument("--p-target", type=float, default=0.05)
    p.add_argument("--c-miss", type=float, default=1.0)
    p.add_argument("--c-fa", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="cap BLAS worker threads (default: $SEED_THREADS)")
    common.add_argument("--deterministic", action="store_true",
                        help="single-ordered reductions (always the case in this build)")
    common.add_argument("--manifest", default=None, help="also write the run manifest here")
    common.add_argument("--log-level", default="WARNING")

    parser = _Parser(prog="seed-embed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("schedule", parents=[common], help="inspect the noise schedule")
    _add_schedule_args(p)
    p.add_argument("--dump", action="store_true")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic mismatch corpus")
    p.add_argument("--out", required=True)
    _add_synth_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train on a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--all-groups", action="store_true", help="ignore split.tsv")
    _add_train_args(p, batch_groups=64)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", parents=[common], help="enhance an EMB1 file")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_infer_args(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", parents=[common], help="score a trial list")
    p.add_argument("--emb", required=True)
    p.add_argument("--emb2", default=None, help="embeddings for the second trial column")
    p.add_argument("--trials", required=True)
    _add_dcf_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p.add_argument("--dim", type=int, default=6)
    p.add_argument("--temb-dim", type=int, default=4)
    p.add_argument("--seeds", type=int, default=3)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("pipeline", parents=[common], help="synth -> train -> enhance -> eval")
    p.add_argument("--out", default=None, help="directory for report, history and model")
    _add_synth_args(p)
    _add_train_args(p, batch_groups=PIPELINE_BATCH_GROUPS)
    _add_infer_args(p)
    _add_dcf_args(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _thread_limit(n):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = args.threads
    if threads is None and os.environ.get("SEED_THREADS"):
        threads = int(os.environ["SEED_THREADS"])
    start = time.perf_counter()
    try:
        with _thread_limit(threads):
            inputs = args.func(args)
    except SeedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = _manifest(args, inputs, time.perf_counter() - start)
    log.info("manifest\n%s", manifest)
    if args.manifest:
        Path(args.manifest).write_text(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
