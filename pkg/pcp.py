"""
pcp.py — K-level parallel concatenated polar (PCP) codes.

Construction:
  1. a rate schedule R_1 > … > R_K with R_i · n̄_i = k exactly (Fractions),
  2. integer set sizes a_j^{(i)} ≈ n_i R_j whose rows sum to k,
  3. per level i, nested information sets A_i^{(i)} ⊇ … ⊇ A_K^{(i)} on a
     (possibly punctured) polar code of length n_i,
  4. bit mappings h^{(i)} routing the bits that must be frozen to lower a
     level's rate into the next transmission.

Inside a level, local bit m sits on the m-th row of the stacked generator:
rows of A_K^{(i)} first, then A_{K-1}^{(i)} \\ A_K^{(i)}, …, A_i^{(i)} \\ A_{i+1}^{(i)},
each block in ascending position order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, field_serializer, field_validator, model_validator

from channels import ChannelModel, assert_degraded_sequence, capacity, parse_channel
from config import GENERATOR_LIMIT, SPEC_SCHEMA_VERSION, TABLE1_K, TABLE1_LENGTHS
from polar_core import (
    InformationSet,
    NestedSetFamily,
    ReliabilityProfile,
    nested_information_sets,
    polar_matrix,
    polar_transform,
    reliability_for,
    sc_decode,
)
from puncturing import (
    PuncturePattern,
    PuncturedPolarCode,
    expand_llrs,
    make_uniform_pattern,
    mother_length,
    puncture,
)


class PcpConstructionError(ValueError):
    """A construction step broke one of the PCP conditions."""

    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


def as_fraction(value) -> Fraction:
    """Exact rational from int, Fraction, 'p/q' or decimal string, or float (by its repr)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def _is_power_of_two_ratio(r: Fraction) -> bool:
    p, q = r.numerator, r.denominator
    return p > 0 and (p & (p - 1)) == 0 and (q & (q - 1)) == 0


# ══════════════════════════════════════════════════════════════════════════════
# Rate schedule
# ══════════════════════════════════════════════════════════════════════════════

class RateSchedule(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    k: int
    rates: tuple[Fraction, ...]
    lengths: tuple[int, ...]

    @field_validator("rates", mode="before")
    @classmethod
    def _parse_rates(cls, v):
        return tuple(as_fraction(r) for r in v)

    @field_serializer("rates")
    def _dump_rates(self, rates: tuple[Fraction, ...]) -> list[str]:
        return [str(r) for r in rates]

    @model_validator(mode="after")
    def _check(self) -> "RateSchedule":
        if len(self.rates) != len(self.lengths) or not self.rates:
            raise ValueError("need one length per rate")
        if any(n < 1 for n in self.lengths):
            raise ValueError(f"lengths must be positive, got {self.lengths}")
        if any(b >= a for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError("rates must be strictly decreasing")
        for i, (r, nbar) in enumerate(zip(self.rates, self.cumulative), start=1):
            if r * nbar != self.k:
                raise ValueError(f"(c.1) R_{i}·n̄_{i} = {r * nbar} != k = {self.k}")
        return self

    @property
    def K(self) -> int:
        return len(self.rates)

    @property
    def cumulative(self) -> tuple[int, ...]:
        out, total = [], 0
        for n in self.lengths:
            total += n
            out.append(total)
        return tuple(out)


def derive_lengths(k: int, rates: Sequence, n_1: int) -> RateSchedule:
    """n_i = R_1 (1/R_i − 1/R_{i−1}) n_1, exact; checks the equivalent rate form."""
    rs = [as_fraction(r) for r in rates]
    if not rs or any(r <= 0 for r in rs):
        raise PcpConstructionError("lengths", "rates must be positive")
    if any(b >= a for a, b in zip(rs, rs[1:])):
        raise PcpConstructionError("lengths", f"rates must be strictly decreasing, got {[str(r) for r in rs]}")
    if rs[0] * n_1 != k:
        raise PcpConstructionError("(c.1)", f"k = {k} but n_1·R_1 = {rs[0] * n_1}")

    lengths = [n_1]
    for i in range(1, len(rs)):
        n_i = rs[0] * (1 / rs[i] - 1 / rs[i - 1]) * n_1
        if n_i.denominator != 1:
            raise PcpConstructionError(
                "lengths", f"n_{i + 1} = {n_i} is not an integer; adjust n_1 or the rates"
            )
        lengths.append(int(n_i))

    # R_i = R_1 / (1 + Σ_{j≤i} n_j / n_1) must give back the requested rates
    for i in range(len(rs)):
        recomputed = rs[0] / (1 + Fraction(sum(lengths[1:i + 1]), n_1))
        if recomputed != rs[i]:
            raise PcpConstructionError("rate-check", f"R_{i + 1} recomputes to {recomputed}, not {rs[i]}")

    return RateSchedule(k=k, rates=tuple(rs), lengths=tuple(lengths))


def schedule_from_lengths(k: int, lengths: Sequence[int]) -> RateSchedule:
    """Pinned lengths; R_i = k / n̄_i."""
    if any(n < 1 for n in lengths):
        raise PcpConstructionError("lengths", f"lengths must be positive, got {tuple(lengths)}")
    total, rates = 0, []
    for n in lengths:
        total += n
        rates.append(Fraction(k, total))
    if Fraction(k, lengths[0]) > 1:
        raise PcpConstructionError("(c.1)", f"k = {k} exceeds n_1 = {lengths[0]}")
    return RateSchedule(k=k, rates=tuple(rates), lengths=tuple(lengths))


class DyadicCheck(NamedTuple):
    feasible: bool
    exponents: tuple[int, ...]


def check_dyadic_feasibility(values: Sequence) -> DyadicCheck:
    """
    Whether R_i = R_1 / (1 + Σ_{j≤i} 2^{ℓ_j}) for integers ℓ_j.

    Works equally on rates or capacities; returns ℓ_2 … ℓ_K when feasible.
    """
    vs = [as_fraction(v) for v in values]
    exponents = []
    for i in range(1, len(vs)):
        ratio = vs[0] * (1 / vs[i] - 1 / vs[i - 1])
        if not _is_power_of_two_ratio(ratio):
            return DyadicCheck(False, ())
        exponents.append(ratio.numerator.bit_length() - ratio.denominator.bit_length())
    return DyadicCheck(True, tuple(exponents))


def rates_from_capacities(k: int, n_1: int, channels: Sequence[ChannelModel]) -> RateSchedule:
    """
    Dyadic schedule for a degraded channel sequence.

    n_i / n_1 targets I(W_1)/I(W_i) − I(W_1)/I(W_{i−1}) and is snapped to the
    nearest power of two, so every level is an unpunctured code when n_1 is.
    """
    caps = [capacity(ch) for ch in channels]
    if any(c <= 0 for c in caps):
        raise PcpConstructionError("dyadic", "every channel needs positive capacity")
    lengths = [n_1]
    for i in range(1, len(caps)):
        target = caps[0] / caps[i] - caps[0] / caps[i - 1]
        if target <= 0:
            raise PcpConstructionError(
                "dyadic", f"capacities must strictly decrease, got {caps[i - 1]:.6f} then {caps[i]:.6f}"
            )
        n_i = Fraction(n_1) * Fraction(2) ** round(math.log2(target))
        if n_i.denominator != 1:
            raise PcpConstructionError("dyadic", f"n_{i + 1} = {n_i} is not an integer; raise n_1")
        lengths.append(int(n_i))
    return schedule_from_lengths(k, lengths)


# ══════════════════════════════════════════════════════════════════════════════
# Set sizes
# ══════════════════════════════════════════════════════════════════════════════

def apportion_sizes(schedule: RateSchedule) -> tuple[tuple[int, ...], ...]:
    """
    Integer sizes a_j^{(i)}, returned row by row: rows[j-1][i-1] for i <= j.

    Each row apportions k over the exact shares n_i·R_j by largest remainder,
    capped so that a_j^{(i)} <= a_{j-1}^{(i)} and a_j^{(i)} <= n_i.
    """
    k, lengths = schedule.k, schedule.lengths
    rows: list[tuple[int, ...]] = []
    for j, rate in enumerate(schedule.rates):
        shares = [n * rate for n in lengths[: j + 1]]
        caps = [min(lengths[i], rows[-1][i]) if rows else lengths[i] for i in range(j)] + [lengths[j]]
        sizes = [min(math.floor(s), c) for s, c in zip(shares, caps)]
        order = sorted(range(j + 1), key=lambda i: (-(shares[i] - math.floor(shares[i])), i))

        remaining = k - sum(sizes)
        while remaining > 0:
            progressed = False
            for i in order:
                if remaining == 0:
                    break
                if sizes[i] < caps[i]:
                    sizes[i] += 1
                    remaining -= 1
                    progressed = True
            if not progressed:
                raise PcpConstructionError("(c.3)", f"row R_{j + 1} cannot place {remaining} more bits")
        rows.append(tuple(sizes))

    for j in range(1, len(rows)):
        if any(rows[j][i] > rows[j - 1][i] for i in range(j)):
            raise PcpConstructionError("(c.2)", f"row R_{j + 1} is not dominated by row R_{j}")
    return tuple(rows)


# ══════════════════════════════════════════════════════════════════════════════
# Bit mappings
# ══════════════════════════════════════════════════════════════════════════════

class BitMapping(BaseModel):
    """h^{(level)}: local position m (1-based) → global information bit table[m-1]."""

    model_config = ConfigDict(frozen=True)

    level: int
    table: tuple[int, ...]

    @model_validator(mode="after")
    def _check(self) -> "BitMapping":
        if len(set(self.table)) != len(self.table):
            raise ValueError(f"h^({self.level}) maps two positions to the same bit")
        return self

    def zero_based(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int64) - 1


def _size(rows, i: int, j: int) -> int:
    """a_j^{(i)} with a_{K+1}^{(i)} = 0."""
    return rows[j - 1][i - 1] if j <= len(rows) else 0


def build_bit_mappings(rows: Sequence[Sequence[int]], k: int) -> tuple[BitMapping, ...]:
    """
    h^{(1)} is the identity on [k]. The domain of h^{(i+1)} is split into
    consecutive blocks of q_i^{(j)} = a_i^{(j)} − a_{i+1}^{(j)} positions,
    j = 1..i; block j takes h^{(j)} at local positions a_{i+1}^{(j)}+1 .. a_i^{(j)}.
    """
    K = len(rows)
    if _size(rows, 1, 1) != k:
        raise PcpConstructionError("mapping", f"a_1^(1) = {_size(rows, 1, 1)} but k = {k}")
    tables: list[list[int]] = [list(range(1, k + 1))]
    for i in range(1, K):
        table: list[int] = []
        for j in range(1, i + 1):
            lo, hi = _size(rows, j, i + 1), _size(rows, j, i)
            if hi < lo:
                raise PcpConstructionError("mapping", f"q_{i}^({j}) = {hi - lo} is negative")
            table.extend(tables[j - 1][lo:hi])
        if len(table) != _size(rows, i + 1, i + 1):
            raise PcpConstructionError(
                "mapping", f"h^({i + 1}) has {len(table)} entries, level size is {_size(rows, i + 1, i + 1)}"
            )
        tables.append(table)
    return tuple(BitMapping(level=i, table=tuple(t)) for i, t in enumerate(tables, start=1))


# ══════════════════════════════════════════════════════════════════════════════
# Spec
# ══════════════════════════════════════════════════════════════════════════════

class PcpLevel(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    length: int
    pattern: PuncturePattern
    nested: NestedSetFamily
    mapping: BitMapping

    @field_validator("pattern", mode="before")
    @classmethod
    def _load_pattern(cls, v):
        if isinstance(v, dict) and "mask" in v:
            return PuncturePattern.from_document(v)
        return v

    @field_serializer("pattern")
    def _dump_pattern(self, pattern: PuncturePattern) -> dict:
        return pattern.to_document()

    @model_validator(mode="after")
    def _check(self) -> "PcpLevel":
        if self.pattern.n != self.length:
            raise ValueError(f"level {self.index}: pattern transmits {self.pattern.n}, length is {self.length}")
        if self.nested.n_u != self.pattern.n_u:
            raise ValueError(f"level {self.index}: sets and pattern disagree on n_u")
        if len(self.mapping.table) != self.nested.sizes[0]:
            raise ValueError(f"level {self.index}: mapping size does not match |A_i^(i)|")
        return self

    @property
    def n_u(self) -> int:
        return self.pattern.n_u

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.nested.sizes

    @property
    def code(self) -> PuncturedPolarCode:
        return PuncturedPolarCode(pattern=self.pattern, info=self.nested.sets[0])

    @cached_property
    def row_positions(self) -> np.ndarray:
        """0-based mother positions of local bits 1..a_i^(i) in stacked order."""
        sets = [set(s.indices) for s in self.nested.sets]
        order = sorted(sets[-1])
        for t in range(len(sets) - 2, -1, -1):
            order.extend(sorted(sets[t] - sets[t + 1]))
        return np.asarray(order, dtype=np.int64) - 1


class PcpSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: int = SPEC_SCHEMA_VERSION
    schedule: RateSchedule
    levels: tuple[PcpLevel, ...]
    design_channels: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.schedule.k

    @property
    def K(self) -> int:
        return self.schedule.K

    def size(self, i: int, j: int) -> int:
        """a_j^{(i)} = |A_j^{(i)}| for j >= i; 0 for j = K+1."""
        if j > self.K:
            return 0
        return self.levels[i - 1].sizes[j - i]

    def q(self, i: int, j: int) -> int:
        """q_i^{(j)} = a_i^{(j)} − a_{i+1}^{(j)}."""
        return self.size(j, i) - self.size(j, i + 1)

    def rows(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(self.size(i, j) for i in range(1, j + 1)) for j in range(1, self.K + 1))

    def segment_images(self, j: int) -> dict[int, frozenset[int]]:
        """I_l^{(j)} for l = j..K: global bits on A_l^{(j)} \\ A_{l+1}^{(j)}."""
        table = self.levels[j - 1].mapping.table
        return {
            l: frozenset(table[self.size(j, l + 1): self.size(j, l)])
            for l in range(j, self.K + 1)
        }

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PcpSpec":
        spec = cls.model_validate_json(text)
        if spec.version != SPEC_SCHEMA_VERSION:
            raise ValueError(f"unsupported spec version {spec.version}")
        validate_pcp(spec)
        return spec


def validate_pcp(spec: PcpSpec) -> None:
    """Raise PcpConstructionError on the first broken condition."""
    sched, K, k = spec.schedule, spec.K, spec.k
    if len(spec.levels) != K:
        raise PcpConstructionError("(c.1)", f"{len(spec.levels)} levels for {K} rates")

    for i, (r, nbar) in enumerate(zip(sched.rates, sched.cumulative), start=1):
        if r * nbar != k:
            raise PcpConstructionError("(c.1)", f"R_{i}·n̄_{i} = {r * nbar} != {k}")

    for i, level in enumerate(spec.levels, start=1):
        if level.index != i or level.length != sched.lengths[i - 1]:
            raise PcpConstructionError("(c.1)", f"level {i} has length {level.length}, schedule says {sched.lengths[i - 1]}")
        if len(level.sizes) != K - i + 1:
            raise PcpConstructionError("(c.2)", f"level {i} carries {len(level.sizes)} nested sets, expected {K - i + 1}")
        sets = [set(s.indices) for s in level.nested.sets]
        if any(not small <= big for big, small in zip(sets, sets[1:])):
            raise PcpConstructionError("(c.2)", f"level {i} sets are not nested")
        if level.sizes[0] > level.length:
            raise PcpConstructionError("(c.3)", f"level {i} carries {level.sizes[0]} bits on {level.length} coordinates")

    rows = spec.rows()
    if rows != apportion_sizes(sched):
        raise PcpConstructionError("(c.3)", f"set sizes {rows} differ from the apportioned sizes")
    for j, row in enumerate(rows, start=1):
        if sum(row) != k:
            raise PcpConstructionError("(c.3)", f"row R_{j} sums to {sum(row)}, not {k}")

    expected = build_bit_mappings(rows, k)
    if tuple(level.mapping for level in spec.levels) != expected:
        raise PcpConstructionError("mapping", "bit mappings do not follow the block rule")

    final: set[int] = set()
    for j in range(1, K + 1):
        images = spec.segment_images(j)
        union = set().union(*images.values())
        if sum(len(s) for s in images.values()) != len(union) or union != set(spec.levels[j - 1].mapping.table):
            raise PcpConstructionError("mapping", f"segments of h^({j}) do not partition its image")
        if final & images[K]:
            raise PcpConstructionError("mapping", f"level {j} re-decodes bits at the lowest rate")
        final |= images[K]
    if final != set(range(1, k + 1)):
        raise PcpConstructionError("mapping", "the lowest-rate segments do not cover every information bit")


def build_pcp(
    k: int,
    n_1: int | None = None,
    channels: Sequence[ChannelModel] = (),
    rates: Sequence | None = None,
    lengths: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
) -> PcpSpec:
    """
    Build and validate a K-level PCP code.

    Exactly one schedule source is used, in order of preference: pinned
    lengths, explicit rates (with n_1), or the degraded channel sequence
    (dyadic lengths from capacities, with n_1). Design channels are given
    one per rate, or once to be reused for every rate.
    """
    channels = list(channels)
    if not channels:
        raise PcpConstructionError("degradation", "at least one design channel is required")
    try:
        degraded = assert_degraded_sequence(channels)
    except ValueError as e:
        raise PcpConstructionError("degradation", str(e)) from e
    if not degraded:
        raise PcpConstructionError("degradation", "design channels are not successively degraded")

    if lengths is not None:
        schedule = schedule_from_lengths(k, lengths)
    elif rates is not None:
        if n_1 is None:
            raise PcpConstructionError("lengths", "n_1 is required with explicit rates")
        schedule = derive_lengths(k, rates, n_1)
    else:
        if n_1 is None:
            raise PcpConstructionError("lengths", "n_1 is required to derive rates from channels")
        schedule = rates_from_capacities(k, n_1, channels)

    K = schedule.K
    if len(channels) == 1:
        channels = channels * K
    if len(channels) != K:
        raise PcpConstructionError("degradation", f"{len(channels)} design channels for {K} rates")

    rows = apportion_sizes(schedule)
    mappings = build_bit_mappings(rows, k)

    profiles: dict[tuple, ReliabilityProfile] = {}
    levels = []
    for i, n_i in enumerate(schedule.lengths, start=1):
        pattern = make_uniform_pattern(mother_length(n_i), n_i)
        level_profiles = []
        for ch in channels[i - 1:]:
            key = (ch, pattern.bits)
            if key not in profiles:
                profiles[key] = reliability_for(ch, pattern.n_u, pattern, rng=rng)
            level_profiles.append(profiles[key])
        sizes = [_size(rows, i, j) for j in range(i, K + 1)]
        nested = nested_information_sets(level_profiles, sizes)
        levels.append(PcpLevel(index=i, length=n_i, pattern=pattern, nested=nested, mapping=mappings[i - 1]))

    spec = PcpSpec(
        schedule=schedule,
        levels=tuple(levels),
        design_channels=tuple(ch.spec_string for ch in channels),
    )
    validate_pcp(spec)
    return spec


def table1_spec(channel: ChannelModel | str) -> PcpSpec:
    """The published three-level construction: k = 192, n = (256, 128, 195)."""
    if isinstance(channel, str):
        channel = parse_channel(channel)
    return build_pcp(TABLE1_K, channels=[channel], lengths=TABLE1_LENGTHS)


# ══════════════════════════════════════════════════════════════════════════════
# Encoding
# ══════════════════════════════════════════════════════════════════════════════

def _check_level(spec: PcpSpec, i: int) -> PcpLevel:
    if not 1 <= i <= spec.K:
        raise ValueError(f"level must lie in [1, {spec.K}], got {i}")
    return spec.levels[i - 1]


def encode_incremental(spec: PcpSpec, u, i: int) -> np.ndarray:
    """Chunk sent in transmission i: length n_i, for one message or a batch."""
    level = _check_level(spec, i)
    u = np.asarray(u)
    if not np.isin(u, (0, 1)).all():
        raise ValueError("message bits must be 0 or 1")
    u = u.astype(np.uint8)
    if u.shape[-1] != spec.k:
        raise ValueError(f"message has {u.shape[-1]} bits, spec carries k = {spec.k}")
    v = np.zeros(u.shape[:-1] + (level.n_u,), dtype=np.uint8)
    v[..., level.row_positions] = u[..., level.mapping.zero_based()]
    return puncture(polar_transform(v), level.pattern)


def assemble_generator(spec: PcpSpec, i: int) -> np.ndarray:
    """G_i = [S_1 … S_i] as a dense k × n̄_i matrix (small codes only)."""
    _check_level(spec, i)
    nbar = spec.schedule.cumulative[i - 1]
    if spec.k * nbar > GENERATOR_LIMIT:
        raise ValueError(f"generator of {spec.k}×{nbar} exceeds the limit of {GENERATOR_LIMIT} entries")
    blocks = []
    for level in spec.levels[:i]:
        rows = polar_matrix(level.n_u)[:, level.pattern.mask()]
        S = np.zeros((spec.k, level.length), dtype=np.uint8)
        S[level.mapping.zero_based()] = rows[level.row_positions]
        blocks.append(S)
    return np.hstack(blocks)


def generator_to_text(G: np.ndarray) -> str:
    return "".join("".join(str(int(b)) for b in row) + "\n" for row in G)


# ══════════════════════════════════════════════════════════════════════════════
# Sequential decoding
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class StageDecision:
    level: int
    indices: tuple[int, ...]          # 1-based message positions decided here
    confident: np.ndarray | bool      # no information decision fell on an LLR tie


@dataclass(frozen=True)
class SequentialResult:
    bits: np.ndarray
    stages: tuple[StageDecision, ...]

    @property
    def decisions(self) -> int:
        return sum(len(s.indices) for s in self.stages)

    def stage_success(self, reference) -> list[np.ndarray | bool]:
        """Per stage, whether every bit it decided matches the reference message."""
        ref = np.asarray(reference, dtype=np.uint8)
        out = []
        for stage in self.stages:
            idx = np.asarray(stage.indices, dtype=np.int64) - 1
            ok = (self.bits[..., idx] == ref[..., idx]).all(axis=-1)
            out.append(bool(ok) if np.ndim(ok) == 0 else ok)
        return out


def sequential_decode(spec: PcpSpec, llr_chunks: Sequence, rule: str = "tanh") -> SequentialResult:
    """
    Decode after m <= K transmissions.

    Level m is decoded in full; then, for i = m−1 … 1, the bits of level i
    already known from later levels are frozen, and the residual rate-R_m
    code on A_m^{(i)} is decoded. Exactly k decisions are made for any m.
    """
    m = len(llr_chunks)
    if not 1 <= m <= spec.K:
        raise ValueError(f"need between 1 and {spec.K} chunks, got {m}")
    chunks = [np.asarray(c, dtype=np.float64) for c in llr_chunks]
    single = chunks[0].ndim == 1
    chunks = [np.atleast_2d(c) for c in chunks]
    batch = chunks[0].shape[0]
    for i, c in enumerate(chunks, start=1):
        if c.shape != (batch, spec.schedule.lengths[i - 1]):
            raise ValueError(f"chunk {i} has shape {c.shape[-1]}, expected length {spec.schedule.lengths[i - 1]}")

    u_hat = np.zeros((batch, spec.k), dtype=np.uint8)
    stages = []
    for i in range(m, 0, -1):
        level = spec.levels[i - 1]
        rp, h = level.row_positions, level.mapping.zero_based()
        a = spec.size(i, m)

        frozen = np.zeros((batch, level.n_u), dtype=np.uint8)
        frozen[:, rp[a:]] = u_hat[:, h[a:]]
        info = InformationSet(n_u=level.n_u, indices=tuple(sorted(int(p) + 1 for p in rp[:a])))
        res = sc_decode(expand_llrs(chunks[i - 1], level.pattern), frozen, info, rule=rule)

        u_hat[:, h[:a]] = res.u_hat[:, rp[:a]]
        confident = res.confident[0] if single else res.confident
        stages.append(StageDecision(level=i, indices=tuple(int(b) + 1 for b in h[:a]), confident=bool(confident) if single else confident))

    return SequentialResult(bits=u_hat[0] if single else u_hat, stages=tuple(stages))
