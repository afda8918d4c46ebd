"""
channels.py — Binary-input memoryless channel models for pcpolar.

Supported families:
  bec:<ε>     — binary erasure channel, erasure probability ε ∈ [0, 1]
  bsc:<p>     — binary symmetric channel, crossover p ∈ [0, 1/2]
  biawgn:<σ>  — BPSK (0 → +1, 1 → −1) over real AWGN with noise std σ > 0

Received symbols are floats; an erasure is NaN (BEC only).
LLRs are ln W(y|0)/W(y|1): positive favours bit 0.
"""
from __future__ import annotations

import math
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import xlogy

from config import GH_NODES, LLR_CLIP

ERASURE: float = float("nan")


class ChannelError(ValueError):
    """Invalid channel description or unsupported channel operation."""


class ChannelKind(str, Enum):
    BEC = "bec"
    BSC = "bsc"
    BIAWGN = "biawgn"


class ChannelModel(BaseModel):
    """Immutable parametric B-DMC."""

    model_config = ConfigDict(frozen=True)

    kind: ChannelKind
    param: float

    @model_validator(mode="after")
    def _check_param(self) -> "ChannelModel":
        p = self.param
        if not math.isfinite(p):
            raise ValueError(f"channel parameter must be finite, got {p}")
        if self.kind is ChannelKind.BEC and not 0.0 <= p <= 1.0:
            raise ValueError(f"BEC erasure probability must lie in [0, 1], got {p}")
        if self.kind is ChannelKind.BSC and not 0.0 <= p <= 0.5:
            raise ValueError(f"BSC crossover must lie in [0, 1/2], got {p}")
        if self.kind is ChannelKind.BIAWGN and p <= 0.0:
            raise ValueError(f"BIAWGN noise std must be > 0, got {p}")
        return self

    @property
    def spec_string(self) -> str:
        return f"{self.kind.value}:{self.param!r}"

    def __str__(self) -> str:
        return self.spec_string


# ── Construction helpers ───────────────────────────────────────────────────────

def bec(epsilon: float) -> ChannelModel:
    return ChannelModel(kind=ChannelKind.BEC, param=epsilon)


def bsc(p: float) -> ChannelModel:
    return ChannelModel(kind=ChannelKind.BSC, param=p)


def biawgn(sigma: float) -> ChannelModel:
    return ChannelModel(kind=ChannelKind.BIAWGN, param=sigma)


def parse_channel(text: str) -> ChannelModel:
    """Parse a CLI channel spec such as ``bec:0.3`` or ``biawgn:0.9``."""
    kind, sep, value = text.strip().partition(":")
    if not sep:
        raise ChannelError(f"Invalid channel spec '{text}'. Expected <kind>:<param>")
    try:
        return ChannelModel(kind=ChannelKind(kind.lower()), param=float(value))
    except ValueError as e:
        raise ChannelError(f"Invalid channel spec '{text}': {e}") from e


def sigma_from_ebn0(ebn0_db: float, rate: float) -> float:
    """Noise std for BPSK at the given Eb/N0 (dB): Eb/N0 = 1 / (2 R σ²)."""
    if rate <= 0:
        raise ChannelError(f"rate must be positive, got {rate}")
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


def ebn0_from_sigma(sigma: float, rate: float) -> float:
    return 10.0 * math.log10(1.0 / (2.0 * rate * sigma ** 2))


# ── Sampling ───────────────────────────────────────────────────────────────────

def transmit(ch: ChannelModel, bits, rng: np.random.Generator) -> np.ndarray:
    """Pass an array of bits through the channel; returns float symbols."""
    x = np.asarray(bits, dtype=np.uint8)
    if x.size and x.max() > 1:
        raise ChannelError("channel input must be binary")

    if ch.kind is ChannelKind.BEC:
        y = x.astype(np.float64)
        y[rng.random(x.shape) < ch.param] = ERASURE
        return y
    if ch.kind is ChannelKind.BSC:
        flips = rng.random(x.shape) < ch.param
        return (x ^ flips).astype(np.float64)
    return (1.0 - 2.0 * x) + ch.param * rng.standard_normal(x.shape)


def sample_output(ch: ChannelModel, bit: int, rng: np.random.Generator) -> float:
    if bit not in (0, 1):
        raise ChannelError(f"bit must be 0 or 1, got {bit}")
    return float(transmit(ch, np.array([bit], dtype=np.uint8), rng)[0])


# ── Soft information ───────────────────────────────────────────────────────────

def _bsc_magnitude(p: float) -> float:
    if p == 0.0:
        return LLR_CLIP
    return min(LLR_CLIP, math.log((1.0 - p) / p))


def llrs(ch: ChannelModel, y) -> np.ndarray:
    """Vectorised LLRs for received symbols."""
    y = np.asarray(y, dtype=np.float64)
    erased = np.isnan(y)

    if ch.kind is ChannelKind.BEC:
        out = np.where(y == 0.0, LLR_CLIP, -LLR_CLIP)
        out[erased] = 0.0
        return out
    if erased.any():
        raise ChannelError(f"erasure symbol is not valid for {ch.kind.value}")
    if ch.kind is ChannelKind.BSC:
        return np.where(y == 0.0, 1.0, -1.0) * _bsc_magnitude(ch.param)
    return 2.0 * y / ch.param ** 2


def llr(ch: ChannelModel, y: float) -> float:
    return float(llrs(ch, np.array([y]))[0])


# ── Capacity ───────────────────────────────────────────────────────────────────

def binary_entropy(p: float) -> float:
    return float(-(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / math.log(2.0))


@lru_cache(maxsize=None)
def _hermite_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.hermite.hermgauss(nodes)
    return t, w


def _biawgn_capacity(sigma: float) -> float:
    # C = 1 − E[log2(1 + e^{−L})], L = 2y/σ², y = 1 + σZ
    t, w = _hermite_rule(GH_NODES)
    y = 1.0 + sigma * math.sqrt(2.0) * t
    loss = np.logaddexp(0.0, -2.0 * y / sigma ** 2) / math.log(2.0)
    return float(1.0 - np.dot(w, loss) / math.sqrt(math.pi))


def capacity(ch: ChannelModel) -> float:
    """Symmetric capacity in bits per channel use."""
    if ch.kind is ChannelKind.BEC:
        return 1.0 - ch.param
    if ch.kind is ChannelKind.BSC:
        return 1.0 - binary_entropy(ch.param)
    return min(1.0, max(0.0, _biawgn_capacity(ch.param)))


# ── Degradation ────────────────────────────────────────────────────────────────

def assert_degraded_sequence(chs: Sequence[ChannelModel]) -> bool:
    """
    True iff the sequence is successively degraded (W_1 ⪰ W_2 ⪰ …).

    Only same-family sequences are certified; within a family a larger
    parameter is always the degraded channel.
    """
    if not chs:
        return True
    kinds = {ch.kind for ch in chs}
    if len(kinds) > 1:
        raise ChannelError(
            f"Degradation is only certified within one family, got {sorted(k.value for k in kinds)}"
        )
    params = [ch.param for ch in chs]
    return all(a <= b for a, b in zip(params, params[1:]))
