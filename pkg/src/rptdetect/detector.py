"""GLRT detectors built on restricted least squares in the RPT dictionary.

Binary rule::

    l(y) = y' B y - y' A y   >  gamma  ->  H1

with ``A`` and ``B`` the orthogonal projectors onto the column spaces of the
dictionary restricted to the supports of ``T0`` and ``T1``.  The M-ary,
multi-electrode rule picks ``argmax_m tr(Y Sigma^-1 Y' A_m)``.

All projectors are formed from a QR factorization of ``K_S``; the Gram matrix
``K_S' K_S`` is never inverted explicitly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import EstimationError, InvalidArgumentError, SingularSupportError
from .ramanujan import (DictionaryMatrix, SupportSet, difference_support, restrict,
                        support_set)

# Relative threshold on |diag(R)| below which K_S is declared rank deficient.
_RANK_RTOL = 1e-10
_SHRINK_START = 1e-3
_EIG_FLOOR = 1e-8


class Hypothesis(enum.IntEnum):
    H0 = 0
    H1 = 1


@dataclass(frozen=True)
class ProjectionOperator:
    """Orthogonal projector ``P = K_S (K_S' K_S)^-1 K_S'``.

    ``basis`` is an orthonormal basis of the column space (``P = basis @ basis.T``);
    the statistics use it directly because ``y' P y == ||basis' y||^2``.
    """

    support: SupportSet | np.ndarray | None
    P: np.ndarray = field(repr=False)
    rank: int
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.P.setflags(write=False)
        self.basis.setflags(write=False)

    @property
    def L(self) -> int:
        return self.P.shape[0]

    def energy(self, y: np.ndarray) -> np.ndarray:
        """``y' P y`` along the last axis of ``y``."""
        return np.sum((y @ self.basis) ** 2, axis=-1)


def _orthonormal_basis(K_S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Q, R = np.linalg.qr(K_S, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() <= _RANK_RTOL * diag.max():
        raise SingularSupportError(
            f"restricted dictionary is rank deficient ({K_S.shape[0]}x{K_S.shape[1]})")
    return Q, R


def projection_operator(K_S: np.ndarray, support=None) -> ProjectionOperator:
    """Projector onto the column space of ``K_S`` (which must have full column rank)."""
    K_S = np.asarray(K_S, dtype=np.float64)
    if K_S.ndim != 2:
        raise InvalidArgumentError("K_S must be a 2-D matrix")
    if K_S.shape[1] == 0:
        L = K_S.shape[0]
        return ProjectionOperator(support, np.zeros((L, L)), 0, np.zeros((L, 0)))
    if K_S.shape[1] > K_S.shape[0]:
        raise SingularSupportError("more support columns than samples")
    Q, _ = _orthonormal_basis(K_S)
    P = Q @ Q.T
    P = 0.5 * (P + P.T)
    return ProjectionOperator(support, P, K_S.shape[1], Q)


def support_operator(dictionary: DictionaryMatrix, T: int) -> ProjectionOperator:
    S = support_set(dictionary, T)
    return projection_operator(restrict(dictionary, S), S)


def restricted_ml_binary(y: np.ndarray, K_S: np.ndarray) -> np.ndarray:
    """Least-squares coefficients ``argmin_x ||y - K_S x||``."""
    y = np.asarray(y, dtype=np.float64)
    K_S = np.asarray(K_S, dtype=np.float64)
    if y.shape[0] != K_S.shape[0]:
        raise InvalidArgumentError(f"y has {y.shape[0]} samples, K_S has {K_S.shape[0]} rows")
    Q, R = _orthonormal_basis(K_S)
    return scipy.linalg.solve_triangular(R, Q.T @ y)


def restricted_ml_mary(Y: np.ndarray, K_S: np.ndarray, sigma=None) -> np.ndarray:
    """Restricted ML estimate of the coefficient matrix for ``Y = K_S X + W``.

    The minimiser of ``tr((Y - K_S X) Sigma^-1 (Y - K_S X)')`` does not depend on
    ``Sigma``; the argument is accepted so callers can pass it uniformly and is
    otherwise unused.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    return restricted_ml_binary(Y, K_S)


@dataclass(frozen=True)
class BinaryDetector:
    A: ProjectionOperator
    B: ProjectionOperator
    gamma: float = 0.0

    def __post_init__(self):
        if self.A.L != self.B.L:
            raise InvalidArgumentError("A and B must act on the same length L")

    @property
    def L(self) -> int:
        return self.A.L


def binary_detector(dictionary: DictionaryMatrix, T0: int, T1: int, gamma: float = 0.0,
                    orthogonal: bool = False) -> BinaryDetector:
    if orthogonal:
        A, B = orthogonal_operators(dictionary, T0, T1)
    else:
        A, B = support_operator(dictionary, T0), support_operator(dictionary, T1)
    return BinaryDetector(A, B, gamma)


def binary_statistic(y: np.ndarray, det: BinaryDetector) -> float | np.ndarray:
    """``y' B y - y' A y``; ``y`` may be a single trial or a stack ``(n, L)``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != det.L:
        raise InvalidArgumentError(f"expected length {det.L}, got {y.shape[-1]}")
    stat = det.B.energy(y) - det.A.energy(y)
    return float(stat) if np.ndim(stat) == 0 else stat


def binary_decide(stat, gamma: float = 0.0):
    """H1 iff ``stat > gamma``; a tie goes to H0."""
    if np.ndim(stat) == 0:
        return Hypothesis.H1 if stat > gamma else Hypothesis.H0
    return (np.asarray(stat) > gamma).astype(int)


def orthogonal_operators(dictionary: DictionaryMatrix, T0: int,
                         T1: int) -> tuple[ProjectionOperator, ProjectionOperator]:
    """Projectors onto the difference supports ``S0 \\ S1`` and ``S1 \\ S0``.

    Only defined for ``L == lcm(T0, T1)``, where the two column spaces are
    orthogonal and the shared divisors cancel from the statistic.
    """
    if T0 == T1:
        raise InvalidArgumentError("T0 and T1 must differ")
    if dictionary.L != math.lcm(T0, T1):
        raise InvalidArgumentError(
            f"orthogonal operators need L = lcm({T0}, {T1}) = {math.lcm(T0, T1)}, "
            f"got L={dictionary.L}")
    S0, S1 = support_set(dictionary, T0), support_set(dictionary, T1)
    d01, d10 = difference_support(S0, S1), difference_support(S1, S0)
    A = projection_operator(restrict(dictionary, d01), d01)
    B = projection_operator(restrict(dictionary, d10), d10)
    return A, B


@dataclass(frozen=True)
class SpatialCovariance:
    """Cross-electrode noise covariance with cached inverse and whitening factor.

    ``whitener`` satisfies ``whitener @ whitener.T == inverse`` so that
    ``tr(Y inverse Y' A) == ||basis' (Y @ whitener)||_F^2``.
    """

    N_c: int
    Sigma: np.ndarray
    inverse: np.ndarray = field(repr=False)
    whitener: np.ndarray = field(repr=False)

    def __post_init__(self):
        for a in (self.Sigma, self.inverse, self.whitener):
            a.setflags(write=False)


def spatial_covariance(Sigma: np.ndarray) -> SpatialCovariance:
    Sigma = np.array(Sigma, dtype=np.float64, ndmin=2)
    if Sigma.shape[0] != Sigma.shape[1]:
        raise InvalidArgumentError("covariance must be square")
    if not np.all(np.isfinite(Sigma)):
        raise InvalidArgumentError("covariance has non-finite entries")
    if np.max(np.abs(Sigma - Sigma.T)) > 1e-10 * max(1.0, np.max(np.abs(Sigma))):
        raise InvalidArgumentError("covariance must be symmetric")
    Sigma = 0.5 * (Sigma + Sigma.T)
    try:
        C = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError("covariance is not positive definite") from exc
    C_inv = scipy.linalg.solve_triangular(C, np.eye(len(C)), lower=True)
    inverse = C_inv.T @ C_inv
    return SpatialCovariance(len(C), Sigma, 0.5 * (inverse + inverse.T), C_inv.T.copy())


def identity_covariance(N_c: int) -> SpatialCovariance:
    return spatial_covariance(np.eye(N_c))


def estimate_spatial_covariance(prestim: Sequence[np.ndarray]) -> SpatialCovariance:
    """Pooled sample covariance of pre-stimulus segments (``L_p x N_c`` each).

    Each segment has its own mean removed.  The pooled estimate is shrunk
    toward a scaled identity, starting at 1e-3 and growing tenfold until the
    smallest eigenvalue clears ``1e-8 * tr / N_c``.
    """
    segments = [np.array(s, dtype=np.float64, ndmin=2) for s in prestim]
    if not segments:
        raise EstimationError("no pre-stimulus segments")
    N_c = segments[0].shape[1]
    if any(s.shape[1] != N_c for s in segments):
        raise InvalidArgumentError("segments disagree on channel count")
    if any(not np.all(np.isfinite(s)) for s in segments):
        raise InvalidArgumentError("pre-stimulus data has non-finite entries")
    n_rows = sum(s.shape[0] for s in segments)
    dof = n_rows - len(segments)
    if n_rows <= N_c or dof < 1:
        raise EstimationError(f"{n_rows} pre-stimulus rows cannot estimate {N_c} channels")
    scatter = np.zeros((N_c, N_c))
    for s in segments:
        centred = s - s.mean(axis=0)
        scatter += centred.T @ centred
    Sigma = scatter / dof
    scale = np.trace(Sigma) / N_c
    if not scale > 0:
        raise EstimationError("pre-stimulus data has zero variance")
    delta = _SHRINK_START
    while True:
        shrunk = (1 - delta) * Sigma + delta * scale * np.eye(N_c)
        shrunk = 0.5 * (shrunk + shrunk.T)
        if np.linalg.eigvalsh(shrunk)[0] > _EIG_FLOOR * scale:
            return spatial_covariance(shrunk)
        delta = min(1.0, delta * 10)


@dataclass(frozen=True)
class MaryDetector:
    operators: tuple[ProjectionOperator, ...]
    sigma: SpatialCovariance
    class_periods: tuple[int, ...]

    def __post_init__(self):
        if len(self.operators) < 2:
            raise InvalidArgumentError("an M-ary detector needs at least two classes")
        if len(self.operators) != len(self.class_periods):
            raise InvalidArgumentError("one operator per class period is required")
        if len(set(self.class_periods)) != len(self.class_periods):
            raise InvalidArgumentError("class periods must be distinct")
        if len({op.L for op in self.operators}) != 1:
            raise InvalidArgumentError("all operators must share L")

    @property
    def L(self) -> int:
        return self.operators[0].L

    @property
    def M(self) -> int:
        return len(self.operators)


def mary_detector(dictionary: DictionaryMatrix, periods: Sequence[int],
                  sigma: SpatialCovariance | np.ndarray | None = None,
                  n_channels: int | None = None) -> MaryDetector:
    if sigma is None:
        sigma = identity_covariance(n_channels or 1)
    elif not isinstance(sigma, SpatialCovariance):
        sigma = spatial_covariance(sigma)
    ops = tuple(support_operator(dictionary, T) for T in periods)
    return MaryDetector(ops, sigma, tuple(int(T) for T in periods))


def _as_trials(Y: np.ndarray, det: MaryDetector) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[-2] != det.L or Y.shape[-1] != det.sigma.N_c:
        raise InvalidArgumentError(
            f"expected trials of shape ({det.L}, {det.sigma.N_c}), got {Y.shape[-2:]}")
    return Y


def mary_statistics(Y: np.ndarray, det: MaryDetector) -> np.ndarray:
    """All ``M`` statistics ``tr(Y Sigma^-1 Y' A_m)``; leading batch axes are kept."""
    Z = _as_trials(Y, det) @ det.sigma.whitener
    stats = [np.sum((np.swapaxes(Z, -1, -2) @ op.basis) ** 2, axis=(-2, -1))
             for op in det.operators]
    return np.stack(stats, axis=-1)


def mary_statistic(Y: np.ndarray, det: MaryDetector, m: int) -> float:
    if not 0 <= m < det.M:
        raise InvalidArgumentError(f"class index {m} out of range")
    Y = _as_trials(Y, det)
    return float(np.trace(Y @ det.sigma.inverse @ Y.T @ det.operators[m].P))


def mary_decide(Y: np.ndarray, det: MaryDetector):
    """Index of the largest statistic; ``np.argmax`` resolves ties to the smallest index."""
    decision = np.argmax(mary_statistics(Y, det), axis=-1)
    return int(decision) if np.ndim(decision) == 0 else decision
