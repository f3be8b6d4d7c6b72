"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every criterion runs at its stated tolerance. A failing criterion fails its
test; the lines are collected again in the terminal summary (see conftest).

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest.
"""

import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from bp6.clinical import aami_from_stats, bland_altman, grade_from_percentages, stats_from_errors
from bp6.cli import main as cli_main
from bp6.data import split_dataset, stack_samples, synth_generate
from bp6.dsp import design_butterworth_lowpass
from bp6.encoders import CacnnEncoder, TcnEncoder
from bp6.losses import LossConfig, contrastive_loss, pair_infonce, total_loss
from bp6.model import ModelConfig, SixModalModel
from bp6.nn import functional as F
from bp6.nn.gradcheck import grad_check, grad_check_report
from bp6.nn.tensor import Parameter, Tensor
from bp6.store import load_store, persist_store
from bp6.train import TrainConfig, fit, predict
from bp6.config import RunConfig
from bp6.vmd import VmdConfig, vmd_decompose
from bp6.wavelet import dwt_db4, idwt_db4

ROOT = Path(__file__).resolve().parents[1]
RESULTS: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    line = f"ACCEPTANCE #{number:<2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


# 1 -------------------------------------------------------------------------------

def _primitive_errors() -> dict[str, float]:
    rng = np.random.default_rng(2024)

    def nudged(shape, spacing=0.05):
        x = rng.normal(size=shape)
        return np.where(np.abs(x) < spacing, np.sign(x + 1e-12) * spacing, x) + rng.uniform(-1e-3, 1e-3, size=shape)

    def check(build, *arrays):
        params = [Parameter(a.copy()) for a in arrays]
        out_shape = build(*params).shape
        w = Tensor(rng.normal(size=out_shape))
        return grad_check(lambda: F.sum(F.mul(build(*params), w)), params)

    rm, rv = np.zeros(3), np.ones(3)
    mask_seed = 11
    return {
        "add": check(F.add, rng.normal(size=(3, 4)), rng.normal(size=(1, 4))),
        "sub": check(F.sub, rng.normal(size=(3, 4)), rng.normal(size=(3, 1))),
        "mul": check(F.mul, rng.normal(size=(3, 4)), rng.normal(size=(3, 4))),
        "scale": check(lambda x: F.scale(x, 1.7), rng.normal(size=(3, 4))),
        "relu": check(F.relu, nudged((4, 5))),
        "sigmoid": check(F.sigmoid, rng.normal(size=(4, 5))),
        "exp": check(F.exp, rng.normal(size=(4, 5))),
        "log": check(F.log, rng.uniform(0.3, 3.0, size=(4, 5))),
        "softmax": check(lambda x: F.softmax(x, axis=-1), rng.normal(size=(3, 5))),
        "sum": check(lambda x: F.sum(x, axis=1), rng.normal(size=(2, 3, 4))),
        "mean": check(lambda x: F.mean(x, axis=0), rng.normal(size=(2, 3, 4))),
        "dot": check(F.dot, rng.normal(size=(4, 6)), rng.normal(size=(4, 6))),
        "l2_norm": check(lambda x: F.l2_norm(x, axis=-1), rng.normal(size=(4, 6))),
        "flatten": check(F.flatten, rng.normal(size=(2, 3, 4))),
        "concat": check(lambda a, b: F.concat([a, b], axis=1), rng.normal(size=(2, 3)), rng.normal(size=(2, 2))),
        "global_avg_pool": check(F.global_avg_pool, rng.normal(size=(2, 3, 7))),
        "linear": check(F.linear, rng.normal(size=(5, 4)), rng.normal(size=(3, 4)), rng.normal(size=3)),
        "conv1d": check(lambda x, w: F.conv1d(x, w, dilation=4, left_pad=8), rng.normal(size=(2, 3, 20)), rng.normal(size=(4, 3, 3))),
        "conv1d_stride": check(lambda x, w, b: F.conv1d(x, w, b, stride=2), rng.normal(size=(2, 2, 15)), rng.normal(size=(3, 2, 4)), rng.normal(size=3)),
        "maxpool1d": check(lambda x: F.maxpool1d(x, 3, 3), rng.permutation(60).reshape(2, 3, 10) * 0.1),
        "batchnorm1d_train": check(lambda x, g, b: F.batchnorm1d(x, g, b, rm, rv, training=True, update_stats=False),
                                   rng.normal(size=(4, 3, 7)), nudged(3, 0.3), rng.normal(size=3)),
        "batchnorm1d_eval": check(lambda x, g, b: F.batchnorm1d(x, g, b, rng.normal(size=3) * 0 + 0.2, np.full(3, 1.5), training=False),
                                  rng.normal(size=(4, 3, 7)), rng.normal(size=3), rng.normal(size=3)),
        "dropout": check(lambda x: F.dropout(x, 0.2, True, np.random.default_rng(mask_seed)), rng.normal(size=(4, 6))),
    }


def test_criterion_01_gradient_fidelity():
    start = time.perf_counter()
    prim = _primitive_errors()
    worst_name = max(prim, key=prim.get)
    prim_ok = prim[worst_name] < 1e-6

    samples, _ = synth_generate(4, seed=11)
    blocks, y = stack_samples(samples)
    model = SixModalModel(ModelConfig(), np.random.default_rng(0))
    model.head.set_output_bias(y.mean(axis=0))
    model.set_modes(batchnorm_train=True, dropout_train=False)
    model.set_update_stats(False)
    # K=5 on a batch of 4: fixed negatives repeat other rows, never the positive
    negatives = np.array([[(i + 1 + (r % 3)) % 4 for r in range(5)] for i in range(4)])
    cfg = LossConfig(lambda_contrastive=0.3, tau=0.5, k_negatives=5)

    def loss():
        pred, emb = model(blocks)
        return total_loss(pred, y, emb, cfg, negatives=negatives)[0]

    params = model.parameters()
    names = [n for n, _ in model.named_parameters()]
    rows = grad_check_report(loss, params, n_coords=200, rng=np.random.default_rng(0))
    rows.sort(key=lambda r: -r[4])
    worst = rows[0]
    over = sum(r[4] >= 1e-4 for r in rows)
    big = [r for r in rows if max(abs(r[2]), abs(r[3])) >= 1e-5]
    big_max = max((r[4] for r in big), default=0.0)
    model_ok = worst[4] < 1e-4
    elapsed = time.perf_counter() - start
    ok = prim_ok and model_ok and elapsed < 120
    detail = (f"primitives max {prim[worst_name]:.1e} ({worst_name}); full model max {worst[4]:.2e} at "
              f"{names[worst[0]]}{[int(i) for i in np.atleast_1d(worst[1])]} (ad {worst[2]:.3e}, fd {worst[3]:.3e}), "
              f"{over}/200 coords >= 1e-4, max over |g| >= 1e-5 is {big_max:.1e}; {elapsed:.0f} s")
    assert record(1, "gradient fidelity", ok, detail), detail


# 2 -------------------------------------------------------------------------------

def test_criterion_02_table_shapes():
    rng = np.random.default_rng(0)
    tcn = TcnEncoder(rng).eval()
    feat = tcn.features(np.zeros((1, 1, 1000))).shape
    tcn_flat = int(np.prod(feat[1:]))
    cacnn = CacnnEncoder(6, rng).eval()
    cac_feat = cacnn.features(np.zeros((1, 6, 1000))).shape
    cac_flat = int(np.prod(cac_feat[1:]))
    ok = (tcn_flat == 9000 and tcn.fc.linears[0].weight.shape[1] == tcn_flat
          and cac_flat == 891 and cacnn.fc.linears[0].weight.shape[1] == cac_flat)
    detail = f"TCN {feat[1:]} -> {tcn_flat}; CACNN lengths {cacnn.lengths}, {cac_feat[1:]} -> {cac_flat}"
    assert record(2, "table shapes", ok, detail), detail


# 3 -------------------------------------------------------------------------------

def test_criterion_03_dwt_round_trip():
    rng = np.random.default_rng(3)
    rec, energy = 0.0, 0.0
    for _ in range(100):
        x = rng.normal(size=1000)
        p = dwt_db4(x)
        rec = max(rec, np.linalg.norm(idwt_db4(p) - x) / np.linalg.norm(x))
        energy = max(energy, abs(p.energy() - np.sum(x ** 2)) / np.sum(x ** 2))
    ok = rec < 1e-9 and energy < 1e-9
    detail = f"max reconstruction {rec:.1e}, max energy deviation {energy:.1e} over 100 segments"
    assert record(3, "DWT db4 round trip", ok, detail), detail


# 4 -------------------------------------------------------------------------------

def test_criterion_04_vmd_two_tone():
    t = np.arange(1000) / 100.0
    x = np.sin(2 * np.pi * 5 * t) + np.sin(2 * np.pi * 25 * t)
    res = vmd_decompose(x, VmdConfig(k_modes=2))
    freqs = res.omega * 100.0
    err = np.linalg.norm(res.modes.sum(axis=0) - x) / np.linalg.norm(x)
    ok = bool(np.all(np.abs(freqs - [5.0, 25.0]) <= 0.5)) and err < 0.05
    detail = f"centers {freqs[0]:.3f} / {freqs[1]:.3f} Hz, mode-sum error {100 * err:.3f}%"
    assert record(4, "VMD two-tone", ok, detail), detail


# 5 -------------------------------------------------------------------------------

def test_criterion_05_filter_design():
    parts, ok = [], True
    for order, fc, fs in ((4, 50.0, 500.0), (2, 7.0, 100.0)):
        c = design_butterworth_lowpass(order, fc, fs)
        db_cut = 20 * math.log10(c.gain(fc))
        db_dc = 20 * math.log10(c.gain(0.0))
        mono = bool(np.all(np.diff(c.gain(np.linspace(0, fs / 2, 512))) <= 1e-12))
        ok &= abs(db_cut + 3.01) <= 0.1 and abs(db_dc) < 1e-9 and mono
        parts.append(f"order {order} {fc:g} Hz@{fs:g}: {db_cut:.4f} dB at cutoff, {db_dc:.1e} dB at DC, monotone={mono}")
    detail = "; ".join(parts)
    assert record(5, "filter design", ok, detail), detail


# 6 -------------------------------------------------------------------------------

def test_criterion_06_infonce_closed_forms():
    equal = contrastive_loss([np.ones((6, 8))] * 6, LossConfig(), rng=np.random.default_rng(0)).item()
    e = np.zeros((6, 4))
    e[:3, 0], e[3:, 0] = 1.0, -1.0
    neg = np.array([[3, 4, 5, 3, 4]] * 3 + [[0, 1, 2, 0, 1]] * 3)
    sep = pair_infonce(e, e.copy(), LossConfig(), negatives=neg).item()
    stated = 0.08758
    ok = abs(equal - math.log(6)) < 1e-9 and abs(sep - stated) < 1e-5
    detail = (f"equal similarities {equal:.12f} (ln 6 = {math.log(6):.12f}); d_pos=1/d_neg=-1 gives {sep:.7f}, "
              f"ln(1+5e^-4) = {math.log(1 + 5 * math.exp(-4)):.7f}, stated {stated} +- 1e-5")
    assert record(6, "InfoNCE closed forms", ok, detail), detail


# 7 -------------------------------------------------------------------------------

def test_criterion_07_clinical_golden():
    grades = [grade_from_percentages(*p) for p in ((73.56, 96.47, 99.68), (82.37, 97.28, 100.00), (85.90, 98.40, 99.84))]
    aami = [aami_from_stats(me, sde, 22) for me, sde in ((-0.11, 4.62), (0.57, 3.93))]
    ok = grades == ["A"] * 3 and all(a.numeric_pass and not a.fully_compliant for a in aami)
    detail = f"BHS {grades}; AAMI numeric {[a.numeric_pass for a in aami]}, fully compliant {[a.fully_compliant for a in aami]}"
    assert record(7, "clinical golden values", ok, detail), detail


# 8 -------------------------------------------------------------------------------

def _learnability_run(store: Path, metrics: Path, cfg: RunConfig):
    split = split_dataset(load_store(store), seed=cfg.seed)
    train, val = stack_samples(split.train), stack_samples(split.validation)
    model = SixModalModel(cfg.model_config(), np.random.default_rng(cfg.seed))
    reached = {}

    def on_epoch(row):
        mae = np.abs(predict(model, train[0]) - train[1]).mean(axis=0)
        if np.all(mae < 2.0):
            reached.update(epoch=row["epoch"], sbp=float(mae[0]), dbp=float(mae[1]))
            return True
        return False

    fit(model, train, val, cfg.train_config(), cfg.loss_config(), metrics_path=metrics, on_epoch=on_epoch)
    return reached


def test_criterion_08_learnability(tmp_path):
    start = time.perf_counter()
    cfg = RunConfig.load(ROOT / "smoke.cfg")
    samples, _ = synth_generate(64, seed=7)
    store = tmp_path / "synth64.bp6s"
    persist_store(samples, store, {"seed": 7, "config_hash": cfg.hash()})
    assert cfg.train_config().epochs == 500
    first = _learnability_run(store, tmp_path / "a.csv", cfg)
    second = _learnability_run(store, tmp_path / "b.csv", cfg)
    identical = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    elapsed = time.perf_counter() - start
    ok = bool(first) and identical and first == second and elapsed < 900
    if first:
        detail = (f"train MAE {first['sbp']:.3f}/{first['dbp']:.3f} mmHg at epoch {first['epoch']} "
                  f"(width small, lr {cfg.train_config().learning_rate:g}); logs bit-identical={identical}; {elapsed:.0f} s")
    else:
        detail = f"train MAE did not reach 2 mmHg in 500 epochs; logs bit-identical={identical}; {elapsed:.0f} s"
    assert record(8, "learnability smoke", ok, detail), detail


# 9 -------------------------------------------------------------------------------

def _fake_dataset(root: Path) -> tuple[Path, Path]:
    sys.path.insert(0, str(Path(__file__).parent))
    from conftest import write_annotations, write_recording

    raw = root / "raw"
    raw.mkdir()
    rows = []
    for i, (subject, state) in enumerate([("s1", "run"), ("s1", "sit"), ("s2", "walk"), ("s3", "sit")]):
        write_recording(raw / f"{subject}_{state}.csv", n=15000, seed=i)
        rows.append((subject, state, 120 + i, 78 - i))
    return raw, write_annotations(root / "annotations.csv", rows)


def test_criterion_09_end_to_end(tmp_path):
    supplied = os.environ.get("BP6_DATASET_DIR")
    if supplied:
        raw = Path(supplied)
        ann = Path(os.environ.get("BP6_ANNOTATIONS", raw / "annotations.csv"))
        config = os.environ.get("BP6_CONFIG", str(ROOT / "paper.cfg"))
        source = f"supplied dataset {raw}"
    else:
        raw, ann = _fake_dataset(tmp_path)
        config = str(ROOT / "smoke.cfg")
        source = "no dataset supplied (BP6_DATASET_DIR unset); generated recordings"
    store, run, rep = tmp_path / "store.bp6s", tmp_path / "run", tmp_path / "report"
    codes = [cli_main(["preprocess", "--input-dir", str(raw), "--annotations", str(ann), "--out", str(store), "--config", config])]
    extra = [] if supplied else ["--epochs", "2"]
    codes.append(cli_main(["train", "--store", str(store), "--config", config, "--out", str(run), *extra]))
    codes.append(cli_main(["eval", "--store", str(store), "--checkpoint", str(run / "checkpoint.bp6c"), "--out", str(rep)]))
    files = ["report.json", "per_sample.csv", "bland_altman_sbp.csv", "bland_altman_dbp.csv",
             "error_hist_sbp.csv", "error_hist_dbp.csv"]
    present = all((rep / f).exists() for f in files)
    ok = codes == [0, 0, 0] and present
    detail = f"{source}; exit codes {codes}; report files complete={present}"
    if present:
        report = json.loads((rep / "report.json").read_text())
        detail += f"; SBP/DBP MAE {report['sbp']['mae']:.2f}/{report['dbp']['mae']:.2f} (no tolerance asserted)"
    assert record(9, "end-to-end pipeline", ok, detail), detail


# 10 ------------------------------------------------------------------------------

def test_criterion_10_statistical_identities():
    rng = np.random.default_rng(10)
    worst, jensen = 0.0, True
    for _ in range(10_000):
        n = int(rng.integers(2, 200))
        err = rng.normal(rng.normal(0, 3), rng.uniform(0.1, 10), size=n)
        s = stats_from_errors(err)
        jensen &= s.mae <= s.rmse
        lhs = s.rmse ** 2
        worst = max(worst, abs(lhs - s.me ** 2 - s.sde ** 2 * (n - 1) / n) / lhs)
    d = rng.normal(1.0, 4.0, size=10_000)
    coverage = bland_altman(d, np.zeros_like(d)).coverage()
    ok = jensen and worst < 1e-9 and 0.94 <= coverage <= 0.96
    detail = f"mae <= rmse on all 10^4 vectors={jensen}; max identity deviation {worst:.1e}; LoA coverage {coverage:.4f}"
    assert record(10, "statistical identities", ok, detail), detail


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
