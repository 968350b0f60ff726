"""PolyDot code parameterisation and symbol counts.

A task multiplies two N x N matrices.  Each matrix is cut into blocks
(``t`` row groups, ``s`` column groups for A, transposed for B) so that a
worker stores a ``1/m`` fraction of each, with ``s * t == m``.  The product
can be decoded from any ``k = t**2 * (2s - 1)`` returned copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

from .errors import InfeasibleSplitError, InvalidSplitError

SplitMode = Literal["stationary", "minimize_k"]


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**6)
    return Fraction(x)


def recovery_threshold(s, t) -> int:
    """Number of returned copies needed to decode, ``t^2 (2s - 1)``."""
    s_ = _as_fraction(s)
    t_ = _as_fraction(t)
    if s_ <= 0 or t_ < 1:
        raise InvalidSplitError(f"split factors must satisfy s > 0, t >= 1 (got s={s}, t={t})")
    k = t_ * t_ * (2 * s_ - 1)
    if k.denominator != 1 or k < 1:
        raise InvalidSplitError(f"t^2(2s-1) = {k} is not a positive integer (s={s}, t={t})")
    return int(k)


@dataclass(frozen=True)
class CodingParams:
    N: int
    m: int
    s: Fraction
    t: int
    k: int

    def __post_init__(self):
        if self.N < 0:
            raise InvalidSplitError(f"matrix size N must be nonnegative, got {self.N}")
        if self.m < 1:
            raise InvalidSplitError(f"storage fraction m must be >= 1, got {self.m}")
        object.__setattr__(self, "s", _as_fraction(self.s))
        if self.s * self.t != self.m:
            raise InvalidSplitError(f"s*t must equal m ({self.s}*{self.t} != {self.m})")
        if recovery_threshold(self.s, self.t) != self.k:
            raise InvalidSplitError(f"k={self.k} does not equal t^2(2s-1) for s={self.s}, t={self.t}")

    @classmethod
    def from_split(cls, N: int, s, t: int) -> "CodingParams":
        s_ = _as_fraction(s)
        m = s_ * t
        if m.denominator != 1:
            raise InvalidSplitError(f"s*t = {m} is not an integer")
        return cls(N=N, m=int(m), s=s_, t=int(t), k=recovery_threshold(s_, t))

    def with_size(self, N: int) -> "CodingParams":
        return CodingParams(N=N, m=self.m, s=self.s, t=self.t, k=self.k)


def integer_splits(m: int) -> list[tuple[int, int]]:
    """All ``(s, t)`` pairs of positive integers with ``s * t == m``."""
    return [(m // t, t) for t in range(1, m + 1) if m % t == 0]


def select_split(m: int, N: int = 1000, mode: SplitMode = "stationary") -> CodingParams:
    """Choose ``(s, t)`` for a storage fraction ``1/m``.

    ``mode="stationary"`` substitutes ``s = m/t`` into the threshold, giving
    ``k(t) = 2mt - t^2``, takes the stationary point ``t = m`` and rounds to
    the nearest admissible integer.  Note this is the *largest* k over the
    integer splits.  ``mode="minimize_k"`` instead enumerates the integer
    splits and keeps the smallest threshold.
    """
    if m < 1:
        raise InfeasibleSplitError(f"m must be >= 1, got {m}")
    if mode == "minimize_k":
        s, t = min(integer_splits(m), key=lambda st: (recovery_threshold(*st), st[1]))
        return CodingParams.from_split(N, s, t)
    if mode != "stationary":
        raise InvalidSplitError(f"unknown split mode {mode!r}")

    # d/dt (2mt - t^2) = 2m - 2t
    t_star = float(m)
    # nearest integers first; k(t) > 0 requires t < 2m
    candidates = sorted(range(1, 2 * m), key=lambda t: (abs(t - t_star), t))
    for t in candidates[:2]:
        s = Fraction(m, t)
        try:
            return CodingParams(N=N, m=m, s=s, t=t, k=recovery_threshold(s, t))
        except InvalidSplitError:
            continue
    raise InfeasibleSplitError(f"no admissible integer split near t={t_star} for m={m}")


@dataclass(frozen=True)
class SymbolCounts:
    d_enc: float
    d_dec: float
    d_comm_to: float
    d_comm_fr: float
    d_cmp: float


def decode_symbols(params: CodingParams) -> float:
    # log base 2, squared: (log2 k)^2
    k = params.k
    return float(params.N) ** 2 * k * math.log2(k) ** 2


def symbol_counts(params: CodingParams, local_copies: int, offload_copies_total: int) -> SymbolCounts:
    if local_copies < 0 or offload_copies_total < 0:
        raise ValueError("copy counts must be nonnegative")
    n2 = float(params.N) ** 2
    return SymbolCounts(
        d_enc=n2 * (local_copies + offload_copies_total),
        d_dec=decode_symbols(params),
        d_comm_to=n2 / params.m,
        d_comm_fr=n2 / params.t**2,
        d_cmp=float(params.N) ** 3 / (params.m * params.t),
    )
