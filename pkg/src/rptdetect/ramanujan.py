"""Ramanujan sums and the nested periodic (RPT) dictionary.

The dictionary ``K`` is the horizontal concatenation of blocks ``R_1 .. R_Pmax``.
Block ``R_q`` holds ``phi(q)`` columns, each a circular downshift of one period
of the Ramanujan sum ``c_q`` extended periodically to ``L`` samples.  Every
entry is an integer; the float copy in :class:`DictionaryMatrix` is built from
the exact integer matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, TextIO

import numpy as np

from .errors import InvalidArgumentError

# Max tolerated imaginary residue of the exponential sum before rounding.
_IMAG_TOL = 1e-9


def _check_positive_int(name: str, value) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise InvalidArgumentError(f"{name} must be >= 1, got {value}")
    return int(value)


@lru_cache(maxsize=None)
def euler_totient(p: int) -> int:
    """Number of integers in ``1..p`` coprime to ``p`` (``phi(1) == 1``)."""
    p = _check_positive_int("p", p)
    result, n, f = p, p, 2
    while f * f <= n:
        if n % f == 0:
            while n % f == 0:
                n //= f
            result -= result // f
        f += 1
    if n > 1:
        result -= result // n
    return result


def divisors(n: int) -> tuple[int, ...]:
    """Sorted positive divisors of ``n``."""
    n = _check_positive_int("n", n)
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    return tuple(small + large[::-1])


@dataclass(frozen=True)
class RamanujanSequence:
    """One period ``c_q(0), ..., c_q(q-1)`` of a Ramanujan sum."""

    q: int
    values: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)


@lru_cache(maxsize=512)
def _ramanujan_values(q: int) -> np.ndarray:
    k = np.array([k for k in range(1, q + 1) if math.gcd(k, q) == 1], dtype=np.int64)
    n = np.arange(q, dtype=np.int64)
    # reduce k*n mod q before scaling so the phase is exact for large q
    phase = 2.0 * np.pi * (np.outer(n, k) % q) / q
    total = np.exp(1j * phase).sum(axis=1)
    residue = np.max(np.abs(total.imag))
    if residue > _IMAG_TOL:
        raise ArithmeticError(f"imaginary residue {residue:.3g} in c_{q}")
    values = np.rint(total.real).astype(np.int64)
    if np.max(np.abs(total.real - values)) > 1e-6:
        raise ArithmeticError(f"c_{q} is not integer within tolerance")
    values.setflags(write=False)
    return values


def ramanujan_sum(q: int) -> RamanujanSequence:
    """Return one period of ``c_q(n)``, evaluated from its exponential sum.

    The sum over the primitive q-th roots of unity is provably an integer; the
    real part is rounded after checking that the imaginary part vanishes.
    """
    q = _check_positive_int("q", q)
    return RamanujanSequence(q, _ramanujan_values(q).copy())


@dataclass(frozen=True)
class PeriodicSubmatrix:
    """The block ``R_q``: ``phi(q)`` downshifted copies of ``c_q`` over ``L`` rows."""

    q: int
    L: int
    columns: np.ndarray

    def __post_init__(self):
        self.columns.setflags(write=False)


def build_submatrix(q: int, L: int) -> PeriodicSubmatrix:
    """Build ``R_q`` with column ``j``, row ``i`` equal to ``c_q((i - j) mod q)``."""
    q = _check_positive_int("q", q)
    L = _check_positive_int("L", L)
    if L < q:
        raise InvalidArgumentError(f"period {q} is longer than the window L={L}")
    c = _ramanujan_values(q)
    rows = np.arange(L)[:, None]
    cols = np.arange(euler_totient(q))[None, :]
    return PeriodicSubmatrix(q, L, c[(rows - cols) % q])


@dataclass(frozen=True)
class DictionaryMatrix:
    """RPT dictionary ``K = [R_1 ... R_Pmax]`` with a period -> column-range index."""

    P_max: int
    L: int
    K: np.ndarray
    index: dict[int, range] = field(repr=False)
    integer_K: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.K.setflags(write=False)
        self.integer_K.setflags(write=False)

    @property
    def n_columns(self) -> int:
        return self.K.shape[1]

    def block(self, p: int) -> np.ndarray:
        return self.K[:, self.index[p].start:self.index[p].stop]


def build_dictionary(P_max: int, L: int) -> DictionaryMatrix:
    """Concatenate ``R_1 .. R_Pmax`` of length ``L``."""
    P_max = _check_positive_int("P_max", P_max)
    L = _check_positive_int("L", L)
    blocks, index, start = [], {}, 0
    for p in range(1, P_max + 1):
        block = build_submatrix(p, L).columns
        index[p] = range(start, start + block.shape[1])
        start += block.shape[1]
        blocks.append(block)
    integer_K = np.hstack(blocks)
    return DictionaryMatrix(P_max, L, integer_K.astype(np.float64), index, integer_K)


@dataclass(frozen=True)
class SupportSet:
    """Columns of ``K`` spanning period ``T`` and all of its divisors."""

    T: int
    indices: np.ndarray
    divisors: tuple[int, ...]

    def __post_init__(self):
        self.indices.setflags(write=False)

    def __len__(self) -> int:
        return len(self.indices)


def support_set(dictionary: DictionaryMatrix, T: int) -> SupportSet:
    T = _check_positive_int("T", T)
    if T > dictionary.P_max:
        raise InvalidArgumentError(
            f"period {T} exceeds the dictionary bound P_max={dictionary.P_max}")
    divs = divisors(T)
    idx = np.concatenate([np.arange(dictionary.index[d].start, dictionary.index[d].stop)
                          for d in divs])
    return SupportSet(T, np.sort(idx), divs)


def restrict(dictionary: DictionaryMatrix, support: SupportSet | Iterable[int]) -> np.ndarray:
    """Return ``K_S``, the columns of ``K`` selected by ``support`` (order kept)."""
    idx = support.indices if isinstance(support, SupportSet) else np.asarray(list(support), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= dictionary.n_columns):
        raise InvalidArgumentError("support index out of range for this dictionary")
    return dictionary.K[:, idx]


def difference_support(a: SupportSet, b: SupportSet) -> np.ndarray:
    """Indices in ``a`` but not in ``b``: the divisors of ``a.T`` not dividing ``b.T``."""
    return np.setdiff1d(a.indices, b.indices, assume_unique=True)


def write_dictionary(dictionary: DictionaryMatrix, stream: TextIO) -> None:
    """Dump ``K`` as whitespace-separated integers under a ``P_max L`` header."""
    stream.write(f"{dictionary.P_max} {dictionary.L}\n")
    for row in dictionary.integer_K:
        stream.write(" ".join(str(int(v)) for v in row))
        stream.write("\n")


def read_dictionary(stream: TextIO) -> tuple[int, int, np.ndarray]:
    header = stream.readline().split()
    if len(header) != 2:
        raise InvalidArgumentError("dictionary dump must start with a 'P_max L' header")
    P_max, L = int(header[0]), int(header[1])
    K = np.loadtxt(stream, dtype=np.int64, ndmin=2)
    if K.shape[0] != L:
        raise InvalidArgumentError(f"expected {L} rows, found {K.shape[0]}")
    return P_max, L, K
