"""Command line interface: preprocess, train, eval, synth, denoise.

Exit codes: 0 success, 2 usage/schema/config, 3 data/numeric, 4 training abort.
Logs go to standard error; results go to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .data import assign_labels, ingest_recording, load_annotations, preprocess_recording, split_dataset, stack_samples, synth_generate
from .denoise import denoise_ecg_array, denoise_ppg_array
from .errors import Bp6Error, ConfigError, ContractError, DataError, FormatError, TrainingAborted
from .clinical import export_report
from .model import ModelConfig, SixModalModel
from .nn.checkpoint import load_checkpoint
from .store import load_sidecar, load_store, persist_store
from .train import fit, predict

log = logging.getLogger("bp6")

CHECKPOINT_NAME = "checkpoint.bp6c"
METRICS_NAME = "metrics.csv"


def resolve_seed(flag: int | None, cfg: RunConfig) -> int:
    """``--seed`` wins, then ``BP6_SEED``, then the config file."""
    if flag is not None:
        return flag
    env = os.environ.get("BP6_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"BP6_SEED must be an integer, got {env!r}") from None
    return cfg.seed


def load_config(path) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig.defaults()


# subcommands -------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg)
    pipe = cfg.pipeline_config()
    input_dir = Path(args.input_dir or cfg.get("data", "input_dir"))
    ann_path = Path(args.annotations or cfg.get("data", "annotations"))
    if not input_dir.is_dir():
        raise ConfigError(f"input directory {input_dir} does not exist")
    annotations = load_annotations(ann_path, pipe.dia_min, pipe.sys_max)
    files = sorted(p for p in input_dir.glob("*.csv") if p.resolve() != ann_path.resolve())
    if not files:
        raise DataError(f"no recordings (*.csv) in {input_dir}")
    workers = args.workers if args.workers is not None else cfg.int("run", "workers")
    samples = []
    for path in files:
        rec = ingest_recording(path)
        log.info("%s: %d samples", path.name, rec.length)
        samples += preprocess_recording(rec, pipe, workers=workers)
    samples = assign_labels(samples, annotations, pipe.dia_min, pipe.sys_max)
    counts = Counter(f"{s.subject_id}/{s.motion_state}" for s in samples)
    meta = {"seed": seed, "config_hash": cfg.hash(), "source": "preprocess", "windows": dict(sorted(counts.items()))}
    persist_store(samples, args.out, meta, length=pipe.window // pipe.decimation)
    print(f"wrote {len(samples)} samples from {len(files)} recordings to {args.out}", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg)
    samples, _ = synth_generate(args.n, seed)
    persist_store(samples, args.out, {"seed": seed, "config_hash": cfg.hash(), "source": "synth"})
    print(f"wrote {len(samples)} synthetic samples to {args.out}", file=sys.stderr)
    return 0


def _split(store_path, seed: int, by_subject: bool):
    samples = load_store(store_path)
    unlabeled = sum(s.label is None for s in samples)
    if unlabeled:
        raise DataError(f"{store_path}: {unlabeled} samples have no label")
    return split_dataset(samples, seed, by_subject=by_subject)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / CHECKPOINT_NAME
    if ckpt.exists():
        log.info("%s exists and will be overwritten (runs never resume)", ckpt)
    by_subject = args.split_by_subject or cfg.bool("data", "split_by_subject")
    split = _split(args.store, seed, by_subject)
    mcfg = cfg.model_config()
    tcfg = cfg.train_config(seed)
    if args.epochs is not None:
        tcfg = type(tcfg)(**{**tcfg.__dict__, "epochs": args.epochs})
    model = SixModalModel(mcfg, np.random.default_rng(seed))
    meta = {
        "model": mcfg.to_dict(), "model_items": mcfg.flat_items(), "config_hash": cfg.hash(),
        "seed": seed, "split_seed": seed, "split_by_subject": by_subject,
        "store_sidecar": load_sidecar(args.store), "version": __version__,
    }
    (out / "run.cfg").write_text(cfg.to_text())
    log.info("split %s; %d parameters", split.counts(), model.parameter_count())
    try:
        res = fit(model, stack_samples(split.train), stack_samples(split.validation), tcfg, cfg.loss_config(),
                  metrics_path=out / METRICS_NAME, checkpoint_path=ckpt, checkpoint_meta=meta)
    except TrainingAborted as e:
        diag = {k: (v if not isinstance(v, float) or np.isfinite(v) else repr(v)) for k, v in e.diagnostics.items()}
        (out / "diagnostics.json").write_text(json.dumps({"error": str(e), **diag,
                                                          "config_hash": cfg.hash(), "seed": seed}, indent=2))
        raise
    print(f"best epoch {res.best_epoch} (val MAE {res.best_val_mae:.3f}); checkpoint {ckpt}", file=sys.stderr)
    return 0


def _check_model_match(expected: ModelConfig, meta: dict):
    saved = meta.get("model_items")
    if saved is None:
        raise FormatError("checkpoint carries no model configuration")
    mine = expected.flat_items()
    for key in sorted(set(mine) | set(saved)):
        if mine.get(key) != saved.get(key):
            raise ContractError(f"checkpoint/model config mismatch at {key}: config has {mine.get(key)!r}, "
                                f"checkpoint has {saved.get(key)!r}")


def cmd_eval(args) -> int:
    state, meta = load_checkpoint(args.checkpoint)
    if args.config:
        cfg = RunConfig.load(args.config)
        mcfg = cfg.model_config()
        _check_model_match(mcfg, meta)
    else:
        if "model" not in meta:
            raise FormatError("checkpoint carries no model configuration")
        mcfg = ModelConfig.from_dict(meta["model"])
    model = SixModalModel(mcfg, np.random.default_rng(0))
    try:
        model.load_state_dict(state)
    except ContractError as e:
        raise ContractError(f"checkpoint does not fit the model: {e}") from None
    model.eval()
    if args.split == "all":
        samples = load_store(args.store)
    else:
        samples = _split(args.store, int(meta.get("split_seed", 0)), bool(meta.get("split_by_subject", False))).test
    if not samples:
        raise ContractError("evaluation set is empty")
    blocks, labels = stack_samples(samples)
    if np.isnan(labels).any():
        raise DataError("evaluation samples must be labeled")
    pred = predict(model, blocks)
    report = export_report(args.out, pred, labels, [s.subject_id for s in samples],
                           [s.motion_state for s in samples], per_subject=args.per_subject)
    report.update(config_hash=meta.get("config_hash"), seed=meta.get("seed"), checkpoint=str(args.checkpoint))
    (Path(args.out) / "report.json").write_text(json.dumps(report, indent=2))
    print(f"SBP MAE {report['sbp']['mae']:.3f}  DBP MAE {report['dbp']['mae']:.3f}  (n={report['n']}) -> {args.out}",
          file=sys.stderr)
    return 0


def cmd_denoise(args) -> int:
    try:
        x = np.loadtxt(args.input, dtype=np.float64, ndmin=1)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read {args.input}: {e}") from None
    if x.ndim != 1:
        raise DataError(f"{args.input}: expected a single column, got shape {x.shape}")
    cfg = load_config(args.config).pipeline_config().denoise
    fn = denoise_ecg_array if args.channel_type == "ecg" else denoise_ppg_array
    y = fn(x, args.fs, cfg, args.channel_type)
    np.savetxt(args.out, y, fmt="%.10g")
    return 0


# entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bp6", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("preprocess", help="recordings + annotations -> segment store")
    s.add_argument("--input-dir")
    s.add_argument("--annotations")
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train", help="train on a segment store")
    s.add_argument("--store", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int, help="override training.epochs")
    s.add_argument("--split-by-subject", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="clinical evaluation of a checkpoint")
    s.add_argument("--store", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--split", choices=("test", "all"), default="test")
    s.add_argument("--per-subject", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a synthetic segment store")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("denoise", help="denoise a single-column text signal")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--channel-type", choices=("ecg", "ppg"), required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--fs", type=float, default=100.0)
    s.add_argument("--config")
    s.set_defaults(func=cmd_denoise)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Bp6Error as e:
        log.error("%s", e)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
