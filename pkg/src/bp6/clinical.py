"""Error statistics, BHS grading, AAMI numeric check, Bland-Altman and report export.

Errors are ``pred - ref`` in mmHg throughout.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError

BHS_THRESHOLDS_MMHG = (5.0, 10.0, 15.0)
# grade -> minimum cumulative percentages within 5/10/15 mmHg
BHS_GRADES = {"A": (60.0, 85.0, 95.0), "B": (50.0, 75.0, 90.0), "C": (40.0, 65.0, 85.0)}
AAMI_MAX_ABS_ME = 5.0
AAMI_MAX_SDE = 8.0
AAMI_MIN_SUBJECTS = 85
LOA_Z = 1.96
SIG_DIGITS = 6


@dataclass(frozen=True)
class ErrorStats:
    n: int
    mae: float
    me: float
    sde: float
    rmse: float


@dataclass(frozen=True)
class BhsReport:
    pct_le_5: float
    pct_le_10: float
    pct_le_15: float
    grade: str


@dataclass(frozen=True)
class AamiReport:
    me: float
    sde: float
    n_subjects: int
    numeric_pass: bool
    fully_compliant: bool


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    loa_low: float
    loa_high: float
    degenerate: bool
    means: np.ndarray
    diffs: np.ndarray

    def coverage(self) -> float:
        return float(np.mean((self.diffs >= self.loa_low) & (self.diffs <= self.loa_high)))


def _pair(pred, ref) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    if pred.shape != ref.shape:
        raise ContractError(f"prediction/reference length mismatch: {pred.size} vs {ref.size}")
    if pred.size < 2:
        raise ContractError(f"need at least 2 pairs, got {pred.size}")
    return pred, ref


def stats_from_errors(err) -> ErrorStats:
    err = np.asarray(err, dtype=np.float64).ravel()
    if err.size < 2:
        raise ContractError(f"need at least 2 errors, got {err.size}")
    return ErrorStats(
        n=int(err.size),
        mae=float(np.mean(np.abs(err))),
        me=float(np.mean(err)),
        sde=float(np.std(err, ddof=1)),
        rmse=float(np.sqrt(np.mean(err**2))),
    )


def compute_errors(pred, ref) -> ErrorStats:
    pred, ref = _pair(pred, ref)
    return stats_from_errors(pred - ref)


def map_from_bp(sbp, dbp):
    """Mean arterial pressure, (SBP + 2 DBP) / 3."""
    return (np.asarray(sbp, dtype=np.float64) + 2.0 * np.asarray(dbp, dtype=np.float64)) / 3.0


def grade_from_percentages(p5: float, p10: float, p15: float) -> str:
    for grade, (a, b, c) in BHS_GRADES.items():
        if p5 >= a and p10 >= b and p15 >= c:
            return grade
    return "D"


def bhs_grade(errors) -> BhsReport:
    err = np.abs(np.asarray(errors, dtype=np.float64).ravel())
    if err.size == 0:
        raise ContractError("BHS grading needs at least one error")
    pcts = [100.0 * np.count_nonzero(err <= t) / err.size for t in BHS_THRESHOLDS_MMHG]
    return BhsReport(*pcts, grade=grade_from_percentages(*pcts))


def aami_from_stats(me: float, sde: float, n_subjects: int) -> AamiReport:
    numeric = abs(me) <= AAMI_MAX_ABS_ME and sde <= AAMI_MAX_SDE
    return AamiReport(me, sde, int(n_subjects), bool(numeric), bool(numeric and n_subjects >= AAMI_MIN_SUBJECTS))


def aami_check(pred, ref, n_subjects: int) -> AamiReport:
    s = compute_errors(pred, ref)
    return aami_from_stats(s.me, s.sde, n_subjects)


def bland_altman(pred, ref) -> BlandAltman:
    pred, ref = _pair(pred, ref)
    d = pred - ref
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    return BlandAltman(bias, bias - LOA_Z * sd, bias + LOA_Z * sd, sd == 0.0, (pred + ref) / 2.0, d)


def error_histogram(errors, width: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Counts on bins ``[k w, (k+1) w)`` spanning the errors; returns (left edges, counts)."""
    err = np.asarray(errors, dtype=np.float64).ravel()
    lo = math.floor(err.min() / width) * width
    hi = (math.floor(err.max() / width) + 1) * width
    edges = np.arange(lo, hi + width / 2, width)
    counts, _ = np.histogram(err, bins=edges)
    return edges[:-1], counts


def quantize(x, digits: int = SIG_DIGITS) -> np.ndarray:
    """Round to ``digits`` significant digits (the value written by ``fmt``)."""
    x = np.asarray(x, dtype=np.float64)
    return np.array([float(f"{v:.{digits}g}") for v in x.ravel()]).reshape(x.shape)


def fmt(v) -> str:
    return f"{float(v):.{SIG_DIGITS}g}"


def aggregate_by_subject(pred, ref, subjects):
    """Per-subject mean of predictions and references, subjects in sorted order."""
    pred, ref = np.asarray(pred, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    subjects = np.asarray(subjects)
    keys = sorted(set(subjects.tolist()))
    p = np.array([pred[subjects == k].mean(axis=0) for k in keys])
    r = np.array([ref[subjects == k].mean(axis=0) for k in keys])
    return p, r, keys


def evaluate(pred, ref, n_subjects: int) -> dict:
    """Report dictionary for ``(N, 2)`` predictions and references (SBP, DBP columns)."""
    pred, ref = np.asarray(pred, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    if pred.ndim != 2 or pred.shape[1] != 2 or pred.shape != ref.shape:
        raise ContractError(f"expected matching (N, 2) arrays, got {pred.shape} and {ref.shape}")
    if len(pred) == 0:
        raise ContractError("cannot evaluate an empty test set")
    targets = {
        "sbp": (pred[:, 0], ref[:, 0]),
        "dbp": (pred[:, 1], ref[:, 1]),
        "map": (map_from_bp(pred[:, 0], pred[:, 1]), map_from_bp(ref[:, 0], ref[:, 1])),
    }
    report = {"n": int(len(pred)), "n_subjects": int(n_subjects)}
    for name, (p, r) in targets.items():
        s = compute_errors(p, r)
        ba = bland_altman(p, r)
        report[name] = {
            "mae": s.mae, "me": s.me, "sde": s.sde, "rmse": s.rmse,
            "bhs": asdict(bhs_grade(p - r)),
            "aami": asdict(aami_from_stats(s.me, s.sde, n_subjects)),
            "bland_altman": {"bias": ba.bias, "loa_low": ba.loa_low, "loa_high": ba.loa_high, "degenerate": ba.degenerate},
        }
    return report


def export_report(out_dir, pred, ref, subjects=None, states=None, n_subjects: int | None = None,
                  per_subject: bool = False) -> dict:
    """Write ``report.json`` and the CSV tables; returns the report.

    Predictions are quantized to the 6 significant digits used in the CSV
    before any statistic is computed, so the per-sample table reproduces
    the JSON exactly.
    """
    pred, ref = np.asarray(pred, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    if pred.size == 0:
        raise ContractError("cannot export a report for an empty test set")
    n = len(pred)
    subjects = np.asarray(subjects if subjects is not None else [""] * n)
    states = np.asarray(states if states is not None else [""] * n)
    if n_subjects is None:
        n_subjects = len(set(subjects.tolist()))
    pred, ref = quantize(pred), quantize(ref)
    if per_subject:
        pred, ref, keys = aggregate_by_subject(pred, ref, subjects)
        pred, ref = quantize(pred), quantize(ref)
        subjects, states = np.asarray(keys), np.asarray([""] * len(keys))
    report = evaluate(pred, ref, n_subjects)
    report["aggregation"] = "subject" if per_subject else "segment"

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(report, indent=2))
        with (out / "per_sample.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subject_id", "motion_state", "sbp_ref", "sbp_pred", "sbp_err",
                        "dbp_ref", "dbp_pred", "dbp_err"])
            for i in range(len(pred)):
                w.writerow([subjects[i], states[i], fmt(ref[i, 0]), fmt(pred[i, 0]), fmt(pred[i, 0] - ref[i, 0]),
                            fmt(ref[i, 1]), fmt(pred[i, 1]), fmt(pred[i, 1] - ref[i, 1])])
        for col, name in enumerate(("sbp", "dbp")):
            ba = bland_altman(pred[:, col], ref[:, col])
            with (out / f"bland_altman_{name}.csv").open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["mean", "difference", "bias", "loa_low", "loa_high"])
                for m, d in zip(ba.means, ba.diffs):
                    w.writerow([fmt(m), fmt(d), fmt(ba.bias), fmt(ba.loa_low), fmt(ba.loa_high)])
            left, counts = error_histogram(pred[:, col] - ref[:, col])
            with (out / f"error_hist_{name}.csv").open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["bin_low", "bin_high", "count"])
                for lo, c in zip(left, counts):
                    w.writerow([fmt(lo), fmt(lo + 1.0), int(c)])
    except OSError as e:
        raise FormatError(f"cannot write report to {out}: {e}") from None
    return report
