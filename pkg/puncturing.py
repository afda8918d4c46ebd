"""
puncturing.py — Puncturing patterns and punctured polar code design.

A pattern p^{n_u} marks transmitted coordinates with 1 and punctured ones
with 0. Punctured coordinates are unknown to the receiver and enter the
decoder as LLR 0; at design time they are modelled as useless channels,
which is the cascade of an erasure-probability-α BEC with W restricted to
the actual pattern.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from channels import ChannelModel
from polar_core import (
    InformationSet,
    ReliabilityProfile,
    is_power_of_two,
    reliability_for,
    select_information_set,
)


# ── Bit ↔ hex helpers (MSB first, explicit length) ────────────────────────────

def bits_to_hex(bits) -> str:
    b = np.asarray(bits, dtype=np.uint8).ravel()
    pad = (-b.size) % 4
    b = np.concatenate([b, np.zeros(pad, dtype=np.uint8)])
    nibbles = b.reshape(-1, 4) @ np.array([8, 4, 2, 1])
    return "".join(f"{int(v):x}" for v in nibbles)


def hex_to_bits(text: str, length: int) -> np.ndarray:
    text = text.strip().lower().removeprefix("0x")
    if len(text) != -(-length // 4):
        raise ValueError(f"hex string of {len(text)} digits cannot carry exactly {length} bits")
    try:
        nibbles = np.array([int(c, 16) for c in text], dtype=np.uint8)
    except ValueError as e:
        raise ValueError(f"Invalid hex string '{text}'") from e
    bits = ((nibbles[:, None] >> np.array([3, 2, 1, 0])) & 1).astype(np.uint8).ravel()
    return bits[:length]


# ══════════════════════════════════════════════════════════════════════════════
# Domain types
# ══════════════════════════════════════════════════════════════════════════════

class PuncturePattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_u: int
    bits: tuple[int, ...]

    @model_validator(mode="after")
    def _check(self) -> "PuncturePattern":
        if not is_power_of_two(self.n_u):
            raise ValueError(f"mother length must be a power of two, got {self.n_u}")
        if len(self.bits) != self.n_u:
            raise ValueError(f"pattern has {len(self.bits)} flags, expected {self.n_u}")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("pattern flags must be 0 (punctured) or 1 (transmitted)")
        if self.n < 1:
            raise ValueError("a pattern must transmit at least one coordinate")
        return self

    @property
    def n(self) -> int:
        return sum(self.bits)

    @property
    def fraction(self) -> Fraction:
        """Puncturing fraction α = (n_u − n) / n_u."""
        return Fraction(self.n_u - self.n, self.n_u)

    def mask(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=bool)

    def punctured_positions(self) -> tuple[int, ...]:
        return tuple(i + 1 for i, b in enumerate(self.bits) if b == 0)

    def to_document(self) -> dict:
        return {"n_u": self.n_u, "mask": bits_to_hex(self.bits)}

    @classmethod
    def from_document(cls, doc: dict) -> "PuncturePattern":
        n_u = int(doc["n_u"])
        return cls(n_u=n_u, bits=tuple(int(b) for b in hex_to_bits(doc["mask"], n_u)))


class PuncturedPolarCode(BaseModel):
    """C(n, R, A, p^{n_u}); frozen bits are always 0."""

    model_config = ConfigDict(frozen=True)

    pattern: PuncturePattern
    info: InformationSet
    frozen_value: int = 0

    @model_validator(mode="after")
    def _check(self) -> "PuncturedPolarCode":
        if self.info.n_u != self.pattern.n_u:
            raise ValueError("information set and pattern disagree on n_u")
        if len(self.info) > self.pattern.n:
            raise ValueError(f"{len(self.info)} information bits exceed {self.pattern.n} transmitted bits")
        if self.frozen_value != 0:
            raise ValueError("frozen bits are fixed to 0")
        return self

    @property
    def n(self) -> int:
        return self.pattern.n

    @property
    def k(self) -> int:
        return len(self.info)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)


# ══════════════════════════════════════════════════════════════════════════════
# Patterns
# ══════════════════════════════════════════════════════════════════════════════

def mother_length(n: int) -> int:
    """Smallest power of two >= n."""
    if n < 1:
        raise ValueError(f"length must be >= 1, got {n}")
    return 1 << (n - 1).bit_length()


def make_uniform_pattern(n_u: int, n: int) -> PuncturePattern:
    """Puncture s = n_u − n evenly spaced positions ⌊(t−1)·n_u/s⌋ + 1."""
    if not 1 <= n <= n_u:
        raise ValueError(f"transmitted length must lie in [1, {n_u}], got {n}")
    s = n_u - n
    bits = [1] * n_u
    for t in range(s):
        bits[(t * n_u) // s] = 0
    return PuncturePattern(n_u=n_u, bits=tuple(bits))


def make_random_pattern(n_u: int, n: int, rng: np.random.Generator) -> PuncturePattern:
    if not 1 <= n <= n_u:
        raise ValueError(f"transmitted length must lie in [1, {n_u}], got {n}")
    bits = np.ones(n_u, dtype=int)
    bits[rng.choice(n_u, size=n_u - n, replace=False)] = 0
    return PuncturePattern(n_u=n_u, bits=tuple(bits.tolist()))


def puncture(x, pattern: PuncturePattern) -> np.ndarray:
    """Keep transmitted coordinates in order (last axis)."""
    x = np.asarray(x)
    if x.shape[-1] != pattern.n_u:
        raise ValueError(f"codeword length {x.shape[-1]} does not match n_u={pattern.n_u}")
    return x[..., pattern.mask()]


def expand_llrs(llrs, pattern: PuncturePattern) -> np.ndarray:
    """Place received LLRs on transmitted positions; punctured positions get 0."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.shape[-1] != pattern.n:
        raise ValueError(f"{llrs.shape[-1]} LLRs received, pattern transmits {pattern.n}")
    out = np.zeros(llrs.shape[:-1] + (pattern.n_u,), dtype=np.float64)
    out[..., pattern.mask()] = llrs
    return out


# ══════════════════════════════════════════════════════════════════════════════
# Design
# ══════════════════════════════════════════════════════════════════════════════

def design_punctured_code(
    ch: ChannelModel,
    n: int,
    k: int | None = None,
    rate: Fraction | float | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[PuncturedPolarCode, ReliabilityProfile]:
    """
    Punctured polar code of transmitted length n carrying k bits (or rate·n).

    n_u is the smallest power of two >= n and the pattern is the evenly
    spaced one; the information set is chosen on the profile that treats
    punctured positions as totally degraded.
    """
    if k is None:
        if rate is None:
            raise ValueError("either k or rate must be given")
        k = round(Fraction(rate).limit_denominator(10 ** 9) * n)
    if not 0 < k <= n:
        raise ValueError(f"k must lie in (0, {n}], got {k}")
    n_u = mother_length(n)
    pattern = make_uniform_pattern(n_u, n)
    profile = reliability_for(ch, n_u, pattern, rng=rng)
    info = select_information_set(profile, k)
    return PuncturedPolarCode(pattern=pattern, info=info), profile
