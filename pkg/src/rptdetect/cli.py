"""Command-line front end: synthetic experiments and classification of recorded trials.

Every run writes a CSV table and ``<out>.meta.json`` holding the full
configuration, seed, library versions and wall time.  ``--config`` replays a
run from that record.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import scipy

from . import __version__, analysis, simulate
from .baselines import DEFAULT_HARMONICS, cca_rho_batch, psda_scores, reference_matrix
from .detector import estimate_spatial_covariance, identity_covariance, mary_detector, mary_statistics
from .errors import InvalidArgumentError, ParseError, RPTError
from .ramanujan import build_dictionary, euler_totient, write_dictionary

MODES = ("dict", "roc", "accuracy", "gap", "tradeoff", "mismatch", "classify")
METHODS = ("rpt", "cca", "psda", "all")

# Goal frequencies (Hz) of the nine-class SSVEP layout, used as mismatch defaults.
NINE_CLASS_FREQUENCIES = (9.25, 9.75, 10.25, 10.75, 11.25, 11.75, 12.25, 12.75, 14.25)

DEFAULT_PERIODS = {
    "dict": (32,),
    "roc": (25, 15),
    "accuracy": (32, 18),
    "gap": (32, 18),
    "tradeoff": tuple(range(10, 21)),
}
DEFAULT_LENGTHS = {
    "dict": (288,),
    "roc": (200,),
    "accuracy": (64, 96, 128, 192, 256, 384, 512),
    "gap": (320, 480, 640, 800, 960, 1120, 1264),
    "tradeoff": (50,),
    "mismatch": (64, 128, 256),
}
DEFAULT_CHANNELS = {"tradeoff": (1, 2, 4, 8), "mismatch": (8,)}
DEFAULT_RHO = {"tradeoff": 0.5, "mismatch": 0.7}


# ---------------------------------------------------------------------------
# Trial files
# ---------------------------------------------------------------------------

def load_trial(path) -> np.ndarray:
    """Read a CSV trial: one row per sample, one column per channel."""
    path = Path(path)
    rows, width = [], None
    with path.open(newline="") as fh:
        for line_no, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            values = []
            for col_no, cell in enumerate(record, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(str(path), line_no, col_no,
                                     f"not a number: {cell.strip()!r}") from None
                if not math.isfinite(v):
                    raise ParseError(str(path), line_no, col_no, f"non-finite value {cell.strip()!r}")
                values.append(v)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(str(path), line_no, len(values),
                                 f"row has {len(values)} columns, expected {width}")
            rows.append(values)
    if not rows:
        raise ParseError(str(path), 1, 1, "file holds no samples")
    return np.array(rows, dtype=np.float64)


def write_trial(trial: np.ndarray, path) -> None:
    """Write a trial so that :func:`load_trial` returns bitwise-equal values."""
    trial = np.asarray(trial, dtype=np.float64)
    if trial.ndim == 1:
        trial = trial[:, None]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in trial:
            writer.writerow([repr(float(v)) for v in row])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def window_trial(trial: np.ndarray, f_s: float, wait_time: float, window: float) -> np.ndarray:
    """Rows ``[round(wait f_s), round(wait f_s) + round(window f_s))``, no resampling."""
    trial = np.asarray(trial)
    if f_s <= 0 or wait_time < 0 or window <= 0:
        raise InvalidArgumentError("need f_s > 0, wait >= 0 and window > 0")
    start = _round_half_up(wait_time * f_s)
    n = _round_half_up(window * f_s)
    if n < 1 or start + n > trial.shape[0]:
        raise InvalidArgumentError(
            f"window [{start}, {start + n}) exceeds the trial's {trial.shape[0]} samples")
    return trial[start:start + n]


def period_from_frequency(f_m: float, f_s: float) -> tuple[int, float]:
    """Nearest integer period ``f_s / f_m`` (halves round up) and the frequency error in Hz."""
    if not 0 < f_m < f_s:
        raise InvalidArgumentError(f"need 0 < f_m < f_s, got f_m={f_m}, f_s={f_s}")
    T = _round_half_up(f_s / f_m)
    return T, f_s / T - f_m


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    mode: str
    periods: tuple[int, ...] = ()
    lengths: tuple[int, ...] = ()
    channels: tuple[int, ...] = ()
    snr_db: float | None = None
    rho: float | None = None
    seed: int = 0
    trials: int = 500
    method: str = "all"
    harmonics: int = DEFAULT_HARMONICS
    fs: float = 256.0
    frequencies: tuple[float, ...] = ()
    alpha: float = 0.5
    prestim_rows: int = 10_000
    compare: bool = False
    dataset: str | None = None
    wait: float = 0.0
    window: float = 1.0
    channel: int = 0
    covariance: str = "estimated"
    dump: bool = False
    workers: int = 1
    out: str = "result.csv"

    def __post_init__(self):
        for name in ("periods", "lengths", "channels", "frequencies"):
            setattr(self, name, tuple(getattr(self, name)))

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise InvalidArgumentError(f"unknown mode {self.mode!r}")
        if self.method not in METHODS:
            raise InvalidArgumentError(f"unknown method {self.method!r}")
        if self.wait < 0 or self.window <= 0:
            raise InvalidArgumentError("wait must be >= 0 and window > 0")
        if self.trials < 1 or self.workers < 1:
            raise InvalidArgumentError("trials and workers must be >= 1")
        if self.mode == "classify" and not self.dataset:
            raise InvalidArgumentError("classify needs --manifest")
        if not self.periods and self.mode != "classify":
            if self.frequencies or self.mode == "mismatch":
                freqs = self.frequencies or NINE_CLASS_FREQUENCIES
                self.periods = tuple(period_from_frequency(f, self.fs)[0] for f in freqs)
            else:
                self.periods = DEFAULT_PERIODS[self.mode]
        if not self.lengths and self.mode != "classify":
            self.lengths = DEFAULT_LENGTHS[self.mode]
        if not self.channels:
            self.channels = DEFAULT_CHANNELS.get(self.mode, (1,))
        if self.rho is None:
            self.rho = DEFAULT_RHO.get(self.mode, 0.0)
        if self.snr_db is None:
            self.snr_db = -10.0 if self.mode == "tradeoff" else -15.0
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class DatasetManifest:
    """Recorded trials to classify, read from a JSON file.

    Paths are relative to the manifest.  ``prestimulus`` entries supply
    noise-only segments for covariance estimation, grouped by subject.
    """

    f_s: float
    channels: int
    classes: list[tuple[str, float]]
    trials: list[tuple[Path, str, str]]
    prestimulus: list[tuple[Path, str]] = field(default_factory=list)

    @property
    def labels(self) -> list[str]:
        return [c[0] for c in self.classes]


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), exc.lineno, exc.colno, exc.msg) from None
    base = path.parent
    try:
        classes = [(str(c["label"]), float(c["frequency"])) for c in data["classes"]]
        trials = [(base / t["path"], str(t["label"]), str(t.get("subject", "")))
                  for t in data["trials"]]
        pre = [(base / p["path"], str(p.get("subject", ""))) for p in data.get("prestimulus", [])]
        manifest = DatasetManifest(float(data["fs"]), int(data["channels"]), classes, trials, pre)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{path}: malformed manifest ({exc})") from None
    if any(f <= 0 for _, f in classes) or manifest.f_s <= 0:
        raise InvalidArgumentError("frequencies and f_s must be positive")
    if len(set(manifest.labels)) != len(classes):
        raise InvalidArgumentError("class labels must be unique")
    unknown = {lab for _, lab, _ in trials} - set(manifest.labels)
    if unknown:
        raise InvalidArgumentError(f"trials reference unknown classes {sorted(unknown)}")
    return manifest


# ---------------------------------------------------------------------------
# Modes
# ---------------------------------------------------------------------------

def _spec(cfg: ExperimentConfig, **overrides) -> simulate.SyntheticSpec:
    N_c = max(cfg.channels)
    spatial = simulate.SpatialModel("rho", cfg.rho) if cfg.rho > 0 else simulate.SpatialModel()
    args = dict(periods=cfg.periods, L=cfg.lengths[0], N_c=N_c, snr_db=cfg.snr_db,
                spatial=spatial, seed=cfg.seed)
    args.update(overrides)
    return simulate.SyntheticSpec(**args)


def _mode_dict(cfg: ExperimentConfig, out: Path) -> dict[str, pd.DataFrame]:
    P_max, L = max(cfg.periods), cfg.lengths[0]
    D = build_dictionary(P_max, L)
    table = pd.DataFrame({
        "period": list(range(1, P_max + 1)),
        "totient": [euler_totient(p) for p in range(1, P_max + 1)],
        "first_column": [D.index[p].start for p in range(1, P_max + 1)],
        "last_column": [D.index[p].stop - 1 for p in range(1, P_max + 1)],
    })
    if cfg.dump:
        with out.with_suffix(".dict.txt").open("w") as fh:
            write_dictionary(D, fh)
    return {"": table}


def _mode_roc(cfg, out):
    if len(cfg.periods) != 2:
        raise InvalidArgumentError("roc needs exactly two periods")
    res = simulate.run_roc(_spec(cfg, N_c=1), n_trials=cfg.trials, workers=cfg.workers)
    cols = ["gamma", "pf_emp", "pd_emp", "pf_theory", "pd_theory"]
    return {"": res.table[cols]}


def _mode_accuracy(cfg, out):
    spec = _spec(cfg)
    if cfg.compare:
        table = simulate.run_harmonic_sweep(spec, cfg.lengths, cfg.trials,
                                            harmonics=range(1, cfg.harmonics + 1), f_s=cfg.fs,
                                            include_psda=spec.N_c == 1, workers=cfg.workers)
    else:
        table = simulate.run_accuracy_vs_length(_spec(cfg, N_c=1), cfg.lengths, cfg.trials,
                                                workers=cfg.workers)
    return {"": table}


def _mode_gap(cfg, out):
    return {"": simulate.run_gap_experiment(_spec(cfg, N_c=1), cfg.lengths, cfg.trials,
                                            alpha=cfg.alpha, workers=cfg.workers)}


def _mode_tradeoff(cfg, out):
    methods = ("rpt", "cca") if cfg.method == "all" else (cfg.method,)
    if "psda" in methods:
        raise InvalidArgumentError("tradeoff supports rpt and cca")
    return {"": simulate.run_tradeoff(_spec(cfg), range(2, len(cfg.periods) + 1), cfg.trials,
                                      channel_counts=cfg.channels, methods=methods, f_s=cfg.fs,
                                      harmonics=cfg.harmonics, workers=cfg.workers)}


def _mode_mismatch(cfg, out):
    return {"": simulate.run_mismatch_experiment(_spec(cfg), cfg.lengths, cfg.trials,
                                                 prestim_rows=cfg.prestim_rows, workers=cfg.workers)}


def _mode_classify(cfg, out):
    manifest = load_manifest(cfg.dataset)
    method = "rpt" if cfg.method == "all" else cfg.method
    freqs = [f for _, f in manifest.classes]
    periods = [period_from_frequency(f, manifest.f_s)[0] for f in freqs]
    if len(set(periods)) != len(periods):
        raise InvalidArgumentError(f"goal frequencies collapse to repeated periods {periods}")
    windows, truth, subjects = [], [], []
    for path, label, subject in manifest.trials:
        trial = load_trial(path)
        if trial.shape[1] != manifest.channels:
            raise InvalidArgumentError(f"{path}: {trial.shape[1]} channels, manifest says "
                                       f"{manifest.channels}")
        windows.append(window_trial(trial, manifest.f_s, cfg.wait, cfg.window))
        truth.append(manifest.labels.index(label))
        subjects.append(subject)
    Y = np.stack(windows)
    L = Y.shape[1]
    if method == "rpt":
        if max(periods) > L:
            raise InvalidArgumentError(f"period {max(periods)} exceeds the window of {L} samples")
        D = build_dictionary(max(periods), L)
        pre_by_subject: dict[str, list] = {}
        for path, subject in manifest.prestimulus:
            pre_by_subject.setdefault(subject, []).append(load_trial(path))
        all_pre = [seg for segs in pre_by_subject.values() for seg in segs]
        pred = np.empty(len(Y), dtype=int)
        for subject in sorted(set(subjects)):
            idx = [i for i, s in enumerate(subjects) if s == subject]
            segs = pre_by_subject.get(subject) or all_pre
            if cfg.covariance == "estimated" and segs:
                cov = estimate_spatial_covariance(segs)
            else:
                cov = identity_covariance(manifest.channels)
            det = mary_detector(D, periods, cov)
            pred[idx] = np.argmax(mary_statistics(Y[idx], det), axis=-1)
    elif method == "cca":
        refs = [reference_matrix(f, cfg.harmonics, manifest.f_s, L) for f in freqs]
        pred = np.argmax(cca_rho_batch(Y, refs), axis=-1)
    else:
        if not 0 <= cfg.channel < manifest.channels:
            raise InvalidArgumentError(f"channel {cfg.channel} out of range")
        pred = np.argmax(psda_scores(Y[..., cfg.channel], freqs, manifest.f_s), axis=-1)
    M = len(freqs)
    C = np.zeros((M, M), dtype=int)
    for t, p in zip(truth, pred):
        C[t, p] += 1
    confusion = pd.DataFrame(C, columns=manifest.labels)
    confusion.insert(0, "true_label", manifest.labels)
    acc = float(np.trace(C) / C.sum())
    summary = pd.DataFrame([{"method": method, "classes": M, "trials": int(C.sum()),
                             "window_s": cfg.window, "wait_s": cfg.wait, "accuracy": acc,
                             "itr_bits_per_min": analysis.itr(M, acc, cfg.window)}])
    return {"": confusion, ".summary": summary}


_DISPATCH = {"dict": _mode_dict, "roc": _mode_roc, "accuracy": _mode_accuracy, "gap": _mode_gap,
             "tradeoff": _mode_tradeoff, "mismatch": _mode_mismatch, "classify": _mode_classify}


def _versions() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pd.__version__, "rptdetect": __version__}


def run(config: ExperimentConfig) -> list[Path]:
    """Execute one configured run; returns the written files (CSV tables, then metadata)."""
    cfg = config.validate()
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    tables = _DISPATCH[cfg.mode](cfg, out)
    written = []
    for suffix, table in tables.items():
        path = out if not suffix else out.with_name(out.stem + suffix + out.suffix)
        table.to_csv(path, index=False, lineterminator="\n")
        written.append(path)
    meta_path = out.with_name(out.name + ".meta.json")
    meta = {"config": cfg.to_dict(), "seed": cfg.seed, "versions": _versions(),
            "wall_time_s": round(time.perf_counter() - t0, 3),
            "outputs": [p.name for p in written]}
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    written.append(meta_path)
    return written


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="replay a run from its .meta.json record")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int, help="trials per class (per hypothesis)")
    common.add_argument("--snr-db", type=float)
    common.add_argument("--length", type=int, nargs="+", dest="lengths", help="trial length(s) in samples")
    common.add_argument("--periods", type=int, nargs="+", help="class periods in samples")
    common.add_argument("--frequencies", type=float, nargs="+", help="goal frequencies in Hz")
    common.add_argument("--channels", type=int, nargs="+", help="electrode count(s)")
    common.add_argument("--rho", type=float, help="spatial correlation decay, 0 for white")
    common.add_argument("--method", choices=METHODS)
    common.add_argument("--harmonics", type=int, help="CCA harmonic count")
    common.add_argument("--wait", type=float, help="wait time after onset, seconds")
    common.add_argument("--window", type=float, help="analysis window, seconds")
    common.add_argument("--fs", type=float, help="sampling rate, Hz")
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="output CSV path")

    parser = argparse.ArgumentParser(prog="rptdetect",
                                     description="Periodic-subspace SSVEP detection experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="mode", required=True)
    p = sub.add_parser("dict", parents=[common], help="dictionary layout (and optional dump)")
    p.add_argument("--dump", action="store_true", help="also write the integer matrix")
    sub.add_parser("roc", parents=[common], help="binary ROC: simulation and model")
    p = sub.add_parser("accuracy", parents=[common], help="accuracy versus trial length")
    p.add_argument("--compare", action="store_true", help="compare with CCA harmonics and PSDA")
    p = sub.add_parser("gap", parents=[common], help="bound-to-detector gap versus L SNR")
    p.add_argument("--alpha", type=float)
    sub.add_parser("tradeoff", parents=[common], help="error exponent versus log2 M")
    p = sub.add_parser("mismatch", parents=[common], help="known/estimated/identity covariance")
    p.add_argument("--prestim-rows", type=int)
    p = sub.add_parser("classify", parents=[common], help="classify recorded trials")
    p.add_argument("--manifest", dest="dataset", required=False)
    p.add_argument("--channel", type=int, help="PSDA channel index")
    p.add_argument("--covariance", choices=("estimated", "identity"))
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config:
        meta = json.loads(Path(args.config).read_text())
        values.update(meta.get("config", meta))
        if values.get("mode") != args.mode:
            raise InvalidArgumentError(f"config is for mode {values.get('mode')!r}, not {args.mode!r}")
    for key, value in vars(args).items():
        if key == "config" or value is None or value is False:
            continue
        values[key] = value
    return ExperimentConfig.from_dict(values)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        written = run(config_from_args(args))
    except (RPTError, OSError, ValueError, ArithmeticError) as exc:
        msg = " ".join(str(exc).split())
        print(f"rptdetect: error: {msg}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
