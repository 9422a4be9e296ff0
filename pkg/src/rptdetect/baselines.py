"""Reference detectors: standard CCA against sinusoidal harmonics, and PSDA."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericError

# Ridge added to each auto-covariance before whitening, relative to trace/dim.
CCA_RIDGE = 1e-8
DEFAULT_HARMONICS = 2


@dataclass(frozen=True)
class ReferenceMatrix:
    """``2 N_h x L`` matrix of rows ``sin(k w l / fs), cos(k w l / fs)``, ``l = 1..L``."""

    f_m: float
    N_h: int
    f_s: float
    Q: np.ndarray

    def __post_init__(self):
        self.Q.setflags(write=False)

    @property
    def L(self) -> int:
        return self.Q.shape[1]


def reference_matrix(f_m: float, N_h: int, f_s: float, L: int) -> ReferenceMatrix:
    if f_m <= 0 or f_s <= 0 or N_h < 1 or L < 1:
        raise InvalidArgumentError("reference matrix needs positive f_m, f_s, N_h and L")
    omega = 2.0 * np.pi * f_m
    l = np.arange(1, L + 1)
    rows = []
    for k in range(1, N_h + 1):
        rows.append(np.sin(k * omega * l / f_s))
        rows.append(np.cos(k * omega * l / f_s))
    return ReferenceMatrix(float(f_m), int(N_h), float(f_s), np.vstack(rows))


def _whitening_factor(C: np.ndarray) -> np.ndarray:
    """Inverse Cholesky factor of ``C + ridge I`` (batched over leading axes)."""
    dim = C.shape[-1]
    tr = np.trace(C, axis1=-2, axis2=-1)
    if np.any(~(tr > 0)):
        raise NumericError("zero-variance input to CCA")
    ridge = CCA_RIDGE * tr / dim
    reg = C + ridge[..., None, None] * np.eye(dim)
    return np.linalg.inv(np.linalg.cholesky(reg))


class _ReferenceBasis:
    """Centered reference signals with a cached whitening factor."""

    def __init__(self, ref: ReferenceMatrix):
        S = ref.Q.T - ref.Q.T.mean(axis=0)
        self.S = S
        self.W = _whitening_factor(S.T @ S)


def cca_rho_batch(Y: np.ndarray, refs: Sequence[ReferenceMatrix]) -> np.ndarray:
    """Maximum canonical correlations for a stack ``(n, L, N_c)``; returns ``(n, M)``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 2:
        Y = Y[None]
    n, L, N_c = Y.shape
    if L <= N_c:
        raise InvalidArgumentError("CCA needs more samples than channels")
    Yc = Y - Y.mean(axis=1, keepdims=True)
    Wy = _whitening_factor(np.swapaxes(Yc, 1, 2) @ Yc)
    out = np.empty((n, len(refs)))
    for m, ref in enumerate(refs):
        if ref.L != L:
            raise InvalidArgumentError(f"reference length {ref.L} != data length {L}")
        if L <= ref.Q.shape[0]:
            raise InvalidArgumentError("CCA needs more samples than reference rows")
        basis = _ReferenceBasis(ref)
        cross = np.swapaxes(Yc, 1, 2) @ basis.S
        M = Wy @ cross @ basis.W.T
        out[:, m] = np.linalg.svd(M, compute_uv=False)[:, 0]
    return np.clip(out, 0.0, 1.0)


def cca_rho(Y: np.ndarray, ref: ReferenceMatrix) -> float:
    """Largest canonical correlation between the channels of ``Y`` and ``ref``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    return float(cca_rho_batch(Y[None], [ref])[0, 0])


def cca_decide(Y: np.ndarray, refs: Sequence[ReferenceMatrix]):
    """Class with the largest canonical correlation (ties -> smallest index)."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim == 2:
        return int(np.argmax(cca_rho_batch(Y[None], refs)[0]))
    return np.argmax(cca_rho_batch(Y, refs), axis=1)


def psda_scores(y: np.ndarray, goal_frequencies: Sequence[float], f_s: float) -> np.ndarray:
    """Periodogram power in the bin nearest each goal frequency, +-1 bin.

    ``y`` is a single-channel trial ``(L,)`` or a stack ``(n, L)``.
    """
    y = np.asarray(y, dtype=np.float64)
    L = y.shape[-1]
    y = y - y.mean(axis=-1, keepdims=True)
    power = np.abs(np.fft.rfft(y, axis=-1)) ** 2 / L
    n_bins = power.shape[-1]
    scores = []
    for f in goal_frequencies:
        k = int(np.floor(f * L / f_s + 0.5))
        lo, hi = max(k - 1, 0), min(k + 1, n_bins - 1)
        scores.append(power[..., lo:hi + 1].sum(axis=-1))
    return np.stack(scores, axis=-1)


def psda_decide(y: np.ndarray, goal_frequencies: Sequence[float], f_s: float):
    decision = np.argmax(psda_scores(y, goal_frequencies, f_s), axis=-1)
    return int(decision) if np.ndim(decision) == 0 else decision
