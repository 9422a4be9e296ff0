"""Synthetic trials and Monte Carlo experiment harnesses.

Trials follow ``Y = K_S X_m + W`` with the rows of ``W`` i.i.d. ``N(0, Sigma_w)``.
Every trial draws from its own RNG streams, keyed by ``(seed, purpose, class,
trial index)``, so a table depends only on the ``SyntheticSpec`` and seed, never on how the
work is split across processes.

Signal and noise come from separate streams and are drawn channel-major, so
the first ``k`` channels of an ``N_c``-channel trial are exactly the
``k``-channel trial with the same key.  Harnesses exploit this nesting to score
several electrode counts on common random numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np
import pandas as pd

from . import analysis
from .baselines import DEFAULT_HARMONICS, cca_rho_batch, psda_scores, reference_matrix
from .detector import (BinaryDetector, SpatialCovariance, binary_detector, estimate_spatial_covariance,
                       identity_covariance, mary_detector, mary_statistics, spatial_covariance)
from .errors import InvalidArgumentError
from .ramanujan import DictionaryMatrix, build_dictionary, restrict, support_set

# RNG stream purposes (first element of the spawn key).
FIXED_SIGNAL_STREAM = 0
SIGNAL_STREAM = 1
NOISE_STREAM = 2
PRESTIM_STREAM = 3

CHUNK = 250


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

def rho_distance_covariance(rho: float, N_c: int, positions: Sequence | None = None) -> np.ndarray:
    """``Sigma_ij = rho ** d_ij``; electrodes default to unit spacing on a line."""
    if not 0 <= rho < 1:
        raise InvalidArgumentError(f"rho must lie in [0, 1), got {rho}")
    if positions is None:
        pos = np.arange(N_c, dtype=float)[:, None]
    else:
        pos = np.array(positions, dtype=float).reshape(N_c, -1)
    d = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    return rho ** d


@dataclass(frozen=True)
class SpatialModel:
    """Cross-electrode noise model: ``identity``, ``rho`` (distance decay) or ``matrix``."""

    kind: Literal["identity", "rho", "matrix"] = "identity"
    rho: float = 0.0
    positions: tuple | None = None
    matrix: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "rho", "matrix"):
            raise InvalidArgumentError(f"unknown spatial model {self.kind!r}")
        if self.kind == "rho" and not 0 <= self.rho < 1:
            raise InvalidArgumentError(f"rho must lie in [0, 1), got {self.rho}")
        if self.kind == "matrix":
            if self.matrix is None:
                raise InvalidArgumentError("matrix model needs a matrix")
            spatial_covariance(np.array(self.matrix, dtype=float))

    @classmethod
    def from_matrix(cls, Sigma) -> "SpatialModel":
        return cls("matrix", matrix=tuple(map(tuple, np.asarray(Sigma, dtype=float))))

    def covariance(self, N_c: int) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(N_c)
        if self.kind == "rho":
            pos = None if self.positions is None else self.positions[:N_c]
            return rho_distance_covariance(self.rho, N_c, pos)
        Sigma = np.array(self.matrix, dtype=float)
        if Sigma.shape[0] < N_c:
            raise InvalidArgumentError(f"matrix model has {Sigma.shape[0]} channels, need {N_c}")
        return Sigma[:N_c, :N_c]

    def spatial(self, N_c: int) -> SpatialCovariance:
        return spatial_covariance(self.covariance(N_c))


@dataclass(frozen=True)
class SyntheticSpec:
    periods: tuple[int, ...]
    L: int
    N_c: int = 1
    snr_db: float = 0.0
    spatial: SpatialModel = field(default_factory=SpatialModel)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(int(T) for T in self.periods))
        if not self.periods or min(self.periods) < 1:
            raise InvalidArgumentError("need at least one positive period")
        if max(self.periods) > self.L:
            raise InvalidArgumentError(
                f"period {max(self.periods)} exceeds the trial length L={self.L}")
        if self.N_c < 1:
            raise InvalidArgumentError("N_c must be >= 1")

    @property
    def snr(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def M(self) -> int:
        return len(self.periods)

    def with_length(self, L: int) -> "SyntheticSpec":
        return replace(self, L=int(L))


@dataclass(frozen=True)
class TrialBatch:
    trials: np.ndarray
    labels: np.ndarray
    spec: SyntheticSpec

    def __post_init__(self):
        if self.trials.ndim != 3 or self.trials.shape[0] != len(self.labels):
            raise InvalidArgumentError("trials must be (n, L, N_c) with one label each")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.spec.M):
            raise InvalidArgumentError("label out of class range")

    def __len__(self) -> int:
        return len(self.labels)


@lru_cache(maxsize=64)
def cached_dictionary(P_max: int, L: int) -> DictionaryMatrix:
    return build_dictionary(P_max, L)


@lru_cache(maxsize=256)
def _support_matrix(P_max: int, L: int, T: int) -> np.ndarray:
    D = cached_dictionary(P_max, L)
    return restrict(D, support_set(D, T))


def spec_dictionary(spec: SyntheticSpec) -> DictionaryMatrix:
    return cached_dictionary(max(spec.periods), spec.L)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key...)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _rescale(X: np.ndarray, K_S: np.ndarray, target_snr: float) -> np.ndarray | None:
    L = K_S.shape[0]
    energy = np.sum((K_S @ X) ** 2, axis=0) / L
    if np.any(energy <= 0):
        return None
    return X * np.sqrt(target_snr / energy)


def sample_representation(T: int, dictionary: DictionaryMatrix, target_snr: float,
                          rng: np.random.Generator, n_channels: int | None = None) -> np.ndarray:
    """Standard-normal coefficients on the support of ``T`` with SNR set exactly.

    Returns ``(T,)`` for a single channel or ``(T, n_channels)``; every channel
    column carries the target SNR.
    """
    if target_snr < 0:
        raise InvalidArgumentError("target SNR must be >= 0")
    K_S = restrict(dictionary, support_set(dictionary, T))
    cols = 1 if n_channels is None else n_channels
    while True:
        X = rng.standard_normal((cols, T)).T
        if target_snr == 0:
            X = np.zeros_like(X)
            break
        scaled = _rescale(X, K_S, target_snr)
        if scaled is not None:
            X = scaled
            break
    return X[:, 0] if n_channels is None else X


def _noise(spec: SyntheticSpec, rng: np.random.Generator, chol: np.ndarray) -> np.ndarray:
    Z = rng.standard_normal((spec.N_c, spec.L)).T
    return Z @ chol.T


def synthesize_trial(spec: SyntheticSpec, m: int, rng, coeffs: np.ndarray | None = None,
                     noise_scale: float = 1.0) -> np.ndarray:
    """One ``L x N_c`` trial of class ``m``.

    ``rng`` is a generator, or a ``(signal_rng, noise_rng)`` pair.  Fixed
    ``coeffs`` (``(T_m,)`` or ``(T_m, N_c)``) skip the random signal draw.
    """
    if not 0 <= m < spec.M:
        raise InvalidArgumentError(f"class {m} out of range")
    sig_rng, noise_rng = rng if isinstance(rng, tuple) else (rng, rng)
    D = spec_dictionary(spec)
    T = spec.periods[m]
    K_S = _support_matrix(D.P_max, spec.L, T)
    if coeffs is None:
        X = sample_representation(T, D, spec.snr, sig_rng, spec.N_c)
    else:
        X = np.asarray(coeffs, dtype=float).reshape(T, -1)
        if X.shape[1] == 1 and spec.N_c > 1:
            X = np.repeat(X, spec.N_c, axis=1)
        X = X[:, :spec.N_c]
    chol = np.linalg.cholesky(spec.spatial.covariance(spec.N_c))
    return K_S @ X + noise_scale * _noise(spec, noise_rng, chol)


def _class_trials(spec: SyntheticSpec, m: int, indices: Iterable[int],
                  coeffs: np.ndarray | None = None, noise_scale: float = 1.0) -> np.ndarray:
    D = spec_dictionary(spec)
    T = spec.periods[m]
    K_S = _support_matrix(D.P_max, spec.L, T)
    chol = np.linalg.cholesky(spec.spatial.covariance(spec.N_c))
    out = []
    for i in indices:
        if coeffs is None:
            X = sample_representation(T, D, spec.snr, trial_rng(spec.seed, SIGNAL_STREAM, m, i),
                                      spec.N_c)
        else:
            X = np.asarray(coeffs, dtype=float).reshape(T, -1)
        W = _noise(spec, trial_rng(spec.seed, NOISE_STREAM, m, i), chol)
        out.append(K_S @ X + noise_scale * W)
    return np.stack(out) if out else np.zeros((0, spec.L, spec.N_c))


def fixed_coefficients(spec: SyntheticSpec, m: int) -> np.ndarray:
    """Deterministic class-``m`` coefficients, one direction per seed, rescaled to ``spec.snr``.

    The direction depends only on ``(seed, m)``, so the same signal shape is
    reused across trial lengths with the SNR held fixed.
    """
    D = spec_dictionary(spec)
    return sample_representation(spec.periods[m], D, spec.snr,
                                 trial_rng(spec.seed, FIXED_SIGNAL_STREAM, m),
                                 None if spec.N_c == 1 else spec.N_c)


def generate_batch(spec: SyntheticSpec, n_per_class: int, coeffs: Sequence | None = None,
                   noise_scale: float = 1.0) -> TrialBatch:
    """``n_per_class`` trials for every class, ordered by class then trial index."""
    trials, labels = [], []
    for m in range(spec.M):
        c = None if coeffs is None else coeffs[m]
        trials.append(_class_trials(spec, m, range(n_per_class), c, noise_scale))
        labels.append(np.full(n_per_class, m))
    return TrialBatch(np.concatenate(trials), np.concatenate(labels), spec)


def prestimulus_segments(spec: SyntheticSpec, n_rows: int, segment_rows: int = 250) -> list[np.ndarray]:
    """Noise-only segments totalling at least ``n_rows`` rows."""
    chol = np.linalg.cholesky(spec.spatial.covariance(spec.N_c))
    seg_spec = replace(spec, L=segment_rows, periods=(1,))
    n_seg = max(1, math.ceil(n_rows / segment_rows))
    return [_noise(seg_spec, trial_rng(spec.seed, PRESTIM_STREAM, 0, i), chol) for i in range(n_seg)]


# ---------------------------------------------------------------------------
# Scoring in parallel chunks
# ---------------------------------------------------------------------------

class BinaryScorer:
    """``(n, 1)`` binary statistic on channel 0."""

    def __init__(self, det: BinaryDetector):
        self.det = det

    def score(self, batch: np.ndarray) -> np.ndarray:
        y = batch[..., 0]
        return (self.det.B.energy(y) - self.det.A.energy(y))[:, None]


class QuadFormScorer:
    """``(n, 2)`` columns ``y'Ay`` and ``y'By`` on channel 0."""

    def __init__(self, det: BinaryDetector):
        self.det = det

    def score(self, batch: np.ndarray) -> np.ndarray:
        y = batch[..., 0]
        return np.column_stack([self.det.A.energy(y), self.det.B.energy(y)])


class RPTScorer:
    def __init__(self, det, n_channels: int):
        self.det, self.n_channels = det, n_channels

    def score(self, batch: np.ndarray) -> np.ndarray:
        return mary_statistics(batch[..., :self.n_channels], self.det)


class CCAScorer:
    def __init__(self, refs, n_channels: int):
        self.refs, self.n_channels = refs, n_channels

    def score(self, batch: np.ndarray) -> np.ndarray:
        return cca_rho_batch(batch[..., :self.n_channels], self.refs)


class PSDAScorer:
    def __init__(self, frequencies, f_s: float, channel: int = 0):
        self.frequencies, self.f_s, self.channel = tuple(frequencies), f_s, channel

    def score(self, batch: np.ndarray) -> np.ndarray:
        return psda_scores(batch[..., self.channel], self.frequencies, self.f_s)


def _score_chunk(task):
    spec, m, start, stop, coeffs, scorers = task
    batch = _class_trials(spec, m, range(start, stop), coeffs)
    return [s.score(batch) for s in scorers]


def _map(func, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks))


def score_trials(spec: SyntheticSpec, n_trials: int, scorers: Sequence, coeffs: Sequence | None = None,
                 classes: Sequence[int] | None = None, workers: int = 1) -> list[list[np.ndarray]]:
    """Score ``n_trials`` trials per class; result ``[class][scorer] -> (n, k)``.

    Chunking is fixed by ``CHUNK`` and results are gathered in submission
    order, so the output is identical for any worker count.
    """
    classes = list(range(spec.M)) if classes is None else list(classes)
    tasks, owner = [], []
    for m in classes:
        c = None if coeffs is None else coeffs[m]
        for start in range(0, n_trials, CHUNK):
            tasks.append((spec, m, start, min(start + CHUNK, n_trials), c, tuple(scorers)))
            owner.append(m)
    results = _map(_score_chunk, tasks, workers)
    out = []
    for m in classes:
        parts = [r for r, o in zip(results, owner) if o == m]
        out.append([np.concatenate([p[k] for p in parts]) for k in range(len(scorers))])
    return out


# ---------------------------------------------------------------------------
# Harnesses
# ---------------------------------------------------------------------------

def _binary_setup(spec: SyntheticSpec, T0=None, T1=None):
    if T0 is not None or T1 is not None:
        spec = replace(spec, periods=(T0, T1))
    if spec.M != 2:
        raise InvalidArgumentError("binary harness needs exactly two periods")
    if spec.N_c != 1:
        spec = replace(spec, N_c=1, spatial=SpatialModel())
    D = spec_dictionary(spec)
    det = binary_detector(D, *spec.periods)
    coeffs = [fixed_coefficients(spec, 0), fixed_coefficients(spec, 1)]
    K0 = _support_matrix(D.P_max, spec.L, spec.periods[0])
    K1 = _support_matrix(D.P_max, spec.L, spec.periods[1])
    params = analysis.chi_params(coeffs[0], coeffs[1], K0, K1, det.A, det.B)
    return spec, det, coeffs, (K0, K1), params


def _exceed_fraction(stats: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    s = np.sort(stats)
    return (len(s) - np.searchsorted(s, gammas, side="right")) / len(s)


@dataclass
class RocResult:
    table: pd.DataFrame
    params: analysis.ChiSquareParams
    dists: tuple
    stats: tuple[np.ndarray, np.ndarray]
    coeffs: list

    @property
    def curve(self) -> analysis.RocCurve:
        pts = self.table[["pf_emp", "pd_emp"]].to_numpy()
        return analysis.RocCurve(pts, "empirical", self.table["gamma"].to_numpy())


def matched_theory_pd(dists, pf) -> np.ndarray:
    """Model ``P_D`` at the threshold whose model ``P_F`` equals ``pf``."""
    h0, h1 = dists
    pf = np.asarray(pf, dtype=float)
    gamma = h0.ppf(1.0 - pf)
    return np.asarray(h1.sf(gamma), dtype=float)


def run_roc(spec: SyntheticSpec, T0: int | None = None, T1: int | None = None,
            n_trials: int = 2500, gamma_grid=None, workers: int = 1) -> RocResult:
    """Empirical ROC with Wilson 95% intervals and the Gaussian model overlay.

    Signals are fixed per hypothesis (see :func:`fixed_coefficients`).
    """
    spec, det, coeffs, _, params = _binary_setup(spec, T0, T1)
    dists = analysis.gaussian_general(params)
    gammas = (analysis.roc_thresholds(dists) if gamma_grid is None
              else np.sort(np.asarray(gamma_grid, dtype=float))[::-1])
    res = score_trials(spec, n_trials, [BinaryScorer(det)], coeffs, workers=workers)
    s0, s1 = res[0][0][:, 0], res[1][0][:, 0]
    pf = _exceed_fraction(s0, gammas)
    pd_ = _exceed_fraction(s1, gammas)
    pd_t, pf_t = analysis.pd_pf(gammas, dists)
    pf_lo, pf_hi = analysis.wilson_interval(pf * n_trials, n_trials)
    pd_lo, pd_hi = analysis.wilson_interval(pd_ * n_trials, n_trials)
    table = pd.DataFrame({"gamma": gammas, "pf_emp": pf, "pd_emp": pd_,
                          "pf_theory": pf_t, "pd_theory": pd_t,
                          "pf_lo": pf_lo, "pf_hi": pf_hi, "pd_lo": pd_lo, "pd_hi": pd_hi})
    return RocResult(table, params, dists, (s0, s1), coeffs)


def run_accuracy_vs_length(spec: SyntheticSpec, lengths: Sequence[int], n_trials: int,
                           random_signals: bool = False, workers: int = 1) -> pd.DataFrame:
    """Binary accuracy at ``gamma = 0`` per length, with the Gaussian-model prediction.

    With ``random_signals`` every trial draws fresh coefficients; the analytic
    column then refers to the fixed per-seed signals and is only indicative.
    """
    rows = []
    for L in lengths:
        s, det, coeffs, _, params = _binary_setup(spec.with_length(L))
        res = score_trials(s, n_trials, [BinaryScorer(det)],
                           None if random_signals else coeffs, workers=workers)
        c0 = int(np.sum(res[0][0][:, 0] <= 0))
        c1 = int(np.sum(res[1][0][:, 0] > 0))
        n = 2 * n_trials
        lo, hi = analysis.wilson_interval(c0 + c1, n)
        pe_t = analysis.analytic_error_probability(params)
        rows.append({"L": int(L), "lsnr": L * s.snr, "correct": c0 + c1, "trials": n,
                     "accuracy": (c0 + c1) / n, "acc_lo": float(lo), "acc_hi": float(hi),
                     "pe": 1 - (c0 + c1) / n, "pe_theory": pe_t,
                     "accuracy_theory": 1 - pe_t})
    return pd.DataFrame(rows)


def run_gap_experiment(spec: SyntheticSpec, lengths: Sequence[int], n_trials: int,
                       alpha: float = 0.5, workers: int = 1) -> pd.DataFrame:
    """Bound-minus-detector gap in ``P_D`` at false-alarm level ``alpha``.

    The empirical detector threshold is the ``1 - alpha`` quantile of the H0
    statistics.  ``gap_theory`` uses the Gaussian model and ``gap_closed`` the
    large-``L SNR`` closed form.
    """
    rows = []
    for L in lengths:
        s, det, coeffs, (K0, K1), params = _binary_setup(spec.with_length(L))
        res = score_trials(s, n_trials, [BinaryScorer(det)], coeffs, workers=workers)
        s0, s1 = res[0][0][:, 0], res[1][0][:, 0]
        gamma = float(np.quantile(s0, 1.0 - alpha))
        hits = int(np.sum(s1 > gamma))
        pd_emp = hits / n_trials
        lo, hi = analysis.wilson_interval(hits, n_trials)
        pmb = analysis.pmb_pd(alpha, coeffs[0], coeffs[1], K0, K1)
        pd_t = analysis.np_pd(alpha, params)
        rows.append({"L": int(L), "lsnr": L * s.snr, "pd_emp": pd_emp, "pd_lo": float(lo),
                     "pd_hi": float(hi), "pd_theory": pd_t, "pd_pmb": pmb,
                     "gap_emp": pmb - pd_emp, "gap_theory": pmb - pd_t,
                     "gap_closed": analysis.gap(L, s.snr)})
    return pd.DataFrame(rows)


def _confusion(scores: list[np.ndarray], M: int) -> np.ndarray:
    C = np.zeros((M, M), dtype=int)
    for m in range(M):
        dec = np.argmax(scores[m][:, :M], axis=1)
        C[m] = np.bincount(dec, minlength=M)
    return C


def run_tradeoff(spec: SyntheticSpec, M_values: Sequence[int], n_trials: int,
                 channel_counts: Sequence[int] = (1, 2, 4, 8), methods: Sequence[str] = ("rpt", "cca"),
                 f_s: float = 256.0, harmonics: int = DEFAULT_HARMONICS,
                 workers: int = 1) -> pd.DataFrame:
    """Error exponent versus ``log2 M`` for each electrode count and method.

    ``spec.periods`` lists the classes in order; ``M`` uses the first ``M``.
    All ``(M, N_c)`` cells share trials: classes are nested by index and
    electrode counts by channel prefix.
    """
    M_values = sorted(int(M) for M in M_values)
    if M_values[0] < 2 or M_values[-1] > spec.M:
        raise InvalidArgumentError(f"M must lie in [2, {spec.M}]")
    N_max = max(channel_counts)
    s = replace(spec, N_c=N_max)
    D = spec_dictionary(s)
    scorers, keys = [], []
    for N_c in channel_counts:
        for method in methods:
            if method == "rpt":
                scorers.append(RPTScorer(mary_detector(D, s.periods, s.spatial.spatial(N_c)), N_c))
            elif method == "cca":
                refs = [reference_matrix(f_s / T, harmonics, f_s, s.L) for T in s.periods]
                scorers.append(CCAScorer(refs, N_c))
            else:
                raise InvalidArgumentError(f"unknown method {method!r}")
            keys.append((method, N_c))
    res = score_trials(s, n_trials, scorers, classes=range(M_values[-1]), workers=workers)
    rows = []
    for k, (method, N_c) in enumerate(keys):
        for M in M_values:
            C = _confusion([res[m][k] for m in range(M)], M)
            trials = M * n_trials
            errors = int(trials - np.trace(C))
            pe = analysis.floored_error_rate(errors, trials)
            lo, hi = analysis.wilson_interval(errors, trials)
            lo = max(float(lo), 1.0 / (2.0 * trials))
            ls = s.L * s.snr
            rows.append({"method": method, "N_c": N_c, "M": M, "log2M": math.log2(M),
                         "errors": errors, "trials": trials, "pe": pe,
                         "exponent": analysis.error_exponent(pe, s.L, s.snr),
                         "exponent_lo": -math.log(float(hi)) / ls,
                         "exponent_hi": -math.log(lo) / ls})
    return pd.DataFrame(rows)


def run_mismatch_experiment(spec: SyntheticSpec, lengths: Sequence[int], n_trials: int,
                            prestim_rows: int = 10_000, segment_rows: int = 250,
                            workers: int = 1) -> pd.DataFrame:
    """M-ary accuracy with the true, the estimated and an identity noise covariance.

    The estimate pools ``prestim_rows`` rows of simulated pre-stimulus noise.
    All three detectors score the same trials.
    """
    if spec.N_c < 2:
        raise InvalidArgumentError("mismatch experiment needs N_c >= 2")
    est = estimate_spatial_covariance(prestimulus_segments(spec, prestim_rows, segment_rows))
    covariances = {"known": spec.spatial.spatial(spec.N_c), "estimated": est,
                   "identity": identity_covariance(spec.N_c)}
    rows = []
    for L in lengths:
        s = spec.with_length(L)
        D = spec_dictionary(s)
        scorers = [RPTScorer(mary_detector(D, s.periods, cov), s.N_c) for cov in covariances.values()]
        res = score_trials(s, n_trials, scorers, workers=workers)
        for k, name in enumerate(covariances):
            C = _confusion([res[m][k] for m in range(s.M)], s.M)
            correct, trials = int(np.trace(C)), s.M * n_trials
            lo, hi = analysis.wilson_interval(correct, trials)
            rows.append({"L": int(L), "covariance": name, "correct": correct, "trials": trials,
                         "accuracy": correct / trials, "acc_lo": float(lo), "acc_hi": float(hi)})
    return pd.DataFrame(rows)


def run_harmonic_sweep(spec: SyntheticSpec, lengths: Sequence[int], n_trials: int,
                       harmonics: Sequence[int] = (1, 2, 3), f_s: float = 256.0,
                       include_psda: bool = False, workers: int = 1) -> pd.DataFrame:
    """RPT versus CCA at several harmonic counts on dictionary-generated signals.

    CCA uses goal frequencies ``f_s / T_m``; every method sees the same trials.
    """
    rows = []
    for L in lengths:
        s = spec.with_length(L)
        D = spec_dictionary(s)
        freqs = [f_s / T for T in s.periods]
        scorers = [RPTScorer(mary_detector(D, s.periods, s.spatial.spatial(s.N_c)), s.N_c)]
        labels = [("rpt", 0)]
        for h in harmonics:
            scorers.append(CCAScorer([reference_matrix(f, h, f_s, L) for f in freqs], s.N_c))
            labels.append(("cca", int(h)))
        if include_psda:
            scorers.append(PSDAScorer(freqs, f_s))
            labels.append(("psda", 0))
        res = score_trials(s, n_trials, scorers, workers=workers)
        for k, (method, h) in enumerate(labels):
            C = _confusion([res[m][k] for m in range(s.M)], s.M)
            correct, trials = int(np.trace(C)), s.M * n_trials
            lo, hi = analysis.wilson_interval(correct, trials)
            rows.append({"L": int(L), "seconds": L / f_s, "method": method, "harmonics": h,
                         "correct": correct, "trials": trials, "accuracy": correct / trials,
                         "acc_lo": float(lo), "acc_hi": float(hi)})
    return pd.DataFrame(rows)
