"""
harness.py — Monte Carlo HARQ-IR simulation.

A scheme is anything that can encode the i-th incremental chunk of a batch
of messages and decode after m chunks: PCP codes (PcpScheme) and the
random-puncturing comparison family (RandomPuncturingFamily) both qualify.

Every trial owns a numpy Generator seeded from
SeedSequence(seed, spawn_key=(point, [rate,] trial)), so results do not
depend on the batch size or on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Literal, Protocol, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from channels import ChannelKind, ChannelModel, biawgn, llrs, sigma_from_ebn0, transmit
from config import DEFAULT_SEED, DEFAULT_THREADS, TRIAL_BATCH
from pcp import PcpSpec, as_fraction, encode_incremental, sequential_decode
from polar_core import InformationSet, polar_transform, reliability_for, sc_decode, select_information_set
from puncturing import PuncturePattern

CSV_COLUMNS = [
    "param", "rate_index", "rate", "trials", "block_errors",
    "bit_errors", "mean_tx", "throughput", "p_stop", "stderr",
]

ProgressCallback = Callable[[int, int], None]


class StopRule(str, Enum):
    FIXED = "fixed"   # always send every chunk
    ACK = "ack"       # stop at the first stage that decodes correctly


class SweepAxis(str, Enum):
    PARAM = "param"   # one channel parameter shared by every transmission
    EBN0 = "ebn0"     # BIAWGN, σ set per rate from Eb/N0 in dB


# ══════════════════════════════════════════════════════════════════════════════
# Schemes
# ══════════════════════════════════════════════════════════════════════════════

class IncrementalScheme(Protocol):
    name: str

    @property
    def k(self) -> int: ...

    @property
    def K(self) -> int: ...

    @property
    def lengths(self) -> tuple[int, ...]: ...

    @property
    def rates(self) -> tuple[Fraction, ...]: ...

    def encode(self, u: np.ndarray, i: int) -> np.ndarray: ...

    def decode(self, llr_chunks: Sequence[np.ndarray]) -> np.ndarray: ...


class PcpScheme:
    """PcpSpec behind the incremental interface."""

    name = "pcp"

    def __init__(self, spec: PcpSpec, rule: str = "tanh"):
        self.spec = spec
        self.rule = rule

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def K(self) -> int:
        return self.spec.K

    @property
    def lengths(self) -> tuple[int, ...]:
        return self.spec.schedule.lengths

    @property
    def rates(self) -> tuple[Fraction, ...]:
        return self.spec.schedule.rates

    def encode(self, u: np.ndarray, i: int) -> np.ndarray:
        return encode_incremental(self.spec, u, i)

    def decode(self, llr_chunks: Sequence[np.ndarray]) -> np.ndarray:
        return sequential_decode(self.spec, llr_chunks, rule=self.rule).bits


class RandomPuncturingFamily(BaseModel):
    """
    One mother polar code made rate-compatible by random puncturing.

    `order` is a seeded permutation of the mother positions; after i chunks
    the first n̄_i positions of the order are known to the receiver, so each
    shorter code punctures a superset of the longer code's punctures.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "random-puncturing"
    n_u: int
    info: InformationSet
    order: tuple[int, ...]
    cumulative: tuple[int, ...]
    rule: Literal["tanh", "minsum"] = "tanh"

    @model_validator(mode="after")
    def _check(self) -> "RandomPuncturingFamily":
        if sorted(self.order) != list(range(self.n_u)):
            raise ValueError("order must be a permutation of the mother positions")
        if any(b <= a for a, b in zip(self.cumulative, self.cumulative[1:])):
            raise ValueError(f"cumulative lengths must increase, got {self.cumulative}")
        if not self.cumulative or self.cumulative[-1] > self.n_u:
            raise ValueError(f"cumulative lengths must not exceed n_u = {self.n_u}")
        if len(self.info) > self.cumulative[0]:
            raise ValueError(f"k = {len(self.info)} exceeds the shortest length {self.cumulative[0]}")
        return self

    @property
    def k(self) -> int:
        return len(self.info)

    @property
    def K(self) -> int:
        return len(self.cumulative)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in zip((0,) + self.cumulative, self.cumulative))

    @property
    def rates(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(self.k, n) for n in self.cumulative)

    def chunk_positions(self, i: int) -> np.ndarray:
        lo = self.cumulative[i - 2] if i > 1 else 0
        return np.sort(np.asarray(self.order[lo:self.cumulative[i - 1]], dtype=np.int64))

    def pattern(self, i: int) -> PuncturePattern:
        """Pattern of the rate-R_i code: the positions received after i chunks."""
        bits = np.zeros(self.n_u, dtype=int)
        bits[list(self.order[:self.cumulative[i - 1]])] = 1
        return PuncturePattern(n_u=self.n_u, bits=tuple(bits.tolist()))

    def encode(self, u: np.ndarray, i: int) -> np.ndarray:
        if not 1 <= i <= self.K:
            raise ValueError(f"chunk index must lie in [1, {self.K}], got {i}")
        u = np.asarray(u, dtype=np.uint8)
        v = np.zeros(u.shape[:-1] + (self.n_u,), dtype=np.uint8)
        v[..., self.info.zero_based()] = u
        return polar_transform(v)[..., self.chunk_positions(i)]

    def decode(self, llr_chunks: Sequence[np.ndarray]) -> np.ndarray:
        first = np.atleast_2d(np.asarray(llr_chunks[0], dtype=np.float64))
        full = np.zeros((first.shape[0], self.n_u), dtype=np.float64)
        for i, chunk in enumerate(llr_chunks, start=1):
            full[:, self.chunk_positions(i)] = np.atleast_2d(chunk)
        bits = sc_decode(full, None, self.info, rule=self.rule).info_bits
        return bits[0] if np.ndim(llr_chunks[0]) == 1 else bits


def random_puncturing_baseline(
    n_u: int,
    k: int,
    rates: Sequence | None = None,
    lengths: Sequence[int] | None = None,
    channel: ChannelModel | None = None,
    seed: int = DEFAULT_SEED,
    rule: str = "tanh",
) -> RandomPuncturingFamily:
    """
    Mother code of length n_u with k bits, information set designed for the
    full length on `channel`; cumulative lengths min(n_u, round(k / R_i))
    unless given directly.
    """
    if lengths is None:
        if rates is None:
            raise ValueError("either rates or cumulative lengths are required")
        lengths = [min(n_u, round(k / as_fraction(r))) for r in rates]
    cumulative = tuple(int(n) for n in lengths)
    if k > min(cumulative):
        raise ValueError(f"k = {k} exceeds the smallest target length {min(cumulative)}")
    channel = channel or biawgn(1.0)
    info = select_information_set(reliability_for(channel, n_u), k)
    order = np.random.default_rng(seed).permutation(n_u)
    return RandomPuncturingFamily(
        n_u=n_u, info=info, order=tuple(int(p) for p in order), cumulative=cumulative, rule=rule,
    )


# ══════════════════════════════════════════════════════════════════════════════
# Trials
# ══════════════════════════════════════════════════════════════════════════════

class TrialConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scheme: Any
    channels: tuple[ChannelModel, ...]
    trials: int = 1
    seed: int = DEFAULT_SEED
    stop_rule: StopRule = StopRule.FIXED

    @model_validator(mode="after")
    def _check(self) -> "TrialConfig":
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.channels or (len(self.channels) != 1 and len(self.channels) < self.scheme.K):
            raise ValueError(f"{len(self.channels)} channels for {self.scheme.K} transmissions")
        return self

    def channel(self, i: int) -> ChannelModel:
        return self.channels[0] if len(self.channels) == 1 else self.channels[i - 1]


class TrialResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    block_errors: tuple[bool, ...]     # per stage: decoded message differs after i chunks
    bit_errors: tuple[int, ...]
    first_success: int | None          # first stage decoded correctly
    transmissions: int                 # chunks sent under the stop rule


def _trial_rng(seed: int, key: tuple[int, ...]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _run_batch(
    scheme: IncrementalScheme,
    channel_for: Callable[[int], ChannelModel],
    rngs: Sequence[np.random.Generator],
    stages: Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Block/bit errors of shape (B, len(stages)) for trials driven by `rngs`."""
    n_chunks = max(stages)
    U = np.stack([rng.integers(0, 2, scheme.k, dtype=np.uint8) for rng in rngs])
    chunks = []
    for i in range(1, n_chunks + 1):
        X = scheme.encode(U, i)
        ch = channel_for(i)
        Y = np.stack([transmit(ch, X[t], rng) for t, rng in enumerate(rngs)])
        chunks.append(llrs(ch, Y))

    wrong = np.stack([scheme.decode(chunks[:m]) != U for m in stages], axis=1)
    return wrong.any(axis=2), wrong.sum(axis=2)


def _stop_stage(block_errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First correct stage per trial (0 = never) and chunks sent under ACK."""
    ok = ~block_errors
    first = np.where(ok.any(axis=1), ok.argmax(axis=1) + 1, 0)
    sent = np.where(first > 0, first, block_errors.shape[1])
    return first, sent


def run_trial(config: TrialConfig, rng: np.random.Generator) -> TrialResult:
    """One message through every transmission of the scheme."""
    scheme = config.scheme
    stages = list(range(1, scheme.K + 1))
    block, bits = _run_batch(scheme, config.channel, [rng], stages)
    first, sent = _stop_stage(block)
    return TrialResult(
        block_errors=tuple(bool(b) for b in block[0]),
        bit_errors=tuple(int(b) for b in bits[0]),
        first_success=int(first[0]) or None,
        transmissions=int(sent[0]) if config.stop_rule is StopRule.ACK else scheme.K,
    )


# ══════════════════════════════════════════════════════════════════════════════
# Aggregation
# ══════════════════════════════════════════════════════════════════════════════

class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    param: float
    rate_index: int
    rate: float
    trials: int
    block_errors: int
    bit_errors: int
    mean_tx: float
    throughput: float
    p_stop: float          # Pr(the last chunk sent is chunk i)
    stderr: float

    @property
    def bler(self) -> float:
        return self.block_errors / self.trials


class SweepResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    scheme: str
    axis: SweepAxis
    k: int
    seed: int
    rows: tuple[SweepRow, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows], columns=CSV_COLUMNS)

    def write_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.10g", lineterminator="\n", encoding="utf-8")
        return path


def _stderr(errors: int, trials: int) -> float:
    p = errors / trials
    return math.sqrt(p * (1.0 - p) / trials)


def _stop_probabilities(first: np.ndarray, trials: int, K: int, ack: bool) -> list[float]:
    """Pr(stop after i chunks), i = 1..K; under ACK a trial that never decodes stops at K."""
    if not ack:
        return [0.0] * (K - 1) + [1.0]
    counts = first[1:K + 1].astype(np.float64)
    counts[K - 1] += first[0]
    return (counts / trials).tolist()


def _batches(trials: int) -> list[range]:
    return [range(s, min(s + TRIAL_BATCH, trials)) for s in range(0, trials, TRIAL_BATCH)]


def _run_point(
    scheme: IncrementalScheme,
    channel_for: Callable[[int], ChannelModel],
    stages: Sequence[int],
    trials: int,
    seed: int,
    key: tuple[int, ...],
    pool: ThreadPoolExecutor | None,
    tick: Callable[[int], None],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Summed block errors, bit errors, first-success counts and chunks sent."""
    def work(span: range):
        rngs = [_trial_rng(seed, key + (t,)) for t in span]
        return _run_batch(scheme, channel_for, rngs, stages)

    spans = _batches(trials)
    results: list = [None] * len(spans)
    if pool is None:
        for b, span in enumerate(spans):
            results[b] = work(span)
            tick(len(span))
    else:
        futures = {pool.submit(work, span): b for b, span in enumerate(spans)}
        for fut in as_completed(futures):
            b = futures[fut]
            results[b] = fut.result()
            tick(len(spans[b]))

    block = np.concatenate([r[0] for r in results])
    bits = np.concatenate([r[1] for r in results])
    first, sent = _stop_stage(block)
    first_counts = np.bincount(first, minlength=len(stages) + 1)
    return block.sum(axis=0), bits.sum(axis=0), first_counts, sent


def sweep(
    scheme: IncrementalScheme,
    values: Sequence[float],
    axis: SweepAxis | str = SweepAxis.PARAM,
    kind: ChannelKind | str = ChannelKind.BEC,
    trials: int = 1000,
    seed: int = DEFAULT_SEED,
    stop_rule: StopRule | str = StopRule.FIXED,
    threads: int = DEFAULT_THREADS,
    progress: ProgressCallback | None = None,
) -> SweepResult:
    """
    Simulate every grid value; one CSV row per (value, rate).

    PARAM axis: each trial sends all K chunks over kind:<value> and every
    rate is read from the same trial. EBN0 axis: rate i is simulated on its
    own with i chunks over BIAWGN at σ(Eb/N0, R_i), and p_stop follows the
    fixed rule (all mass on rate K).
    """
    axis, kind, stop_rule = SweepAxis(axis), ChannelKind(kind), StopRule(stop_rule)
    if not values:
        raise ValueError("sweep grid is empty")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if axis is SweepAxis.EBN0 and stop_rule is StopRule.ACK:
        raise ValueError("the ack stop rule needs every rate from one trial (param axis)")

    K, k = scheme.K, scheme.k
    total = trials * len(values) * (K if axis is SweepAxis.EBN0 else 1)
    done = 0

    def tick(n: int) -> None:
        nonlocal done
        done += n
        if progress is not None:
            progress(done, total)

    rows: list[SweepRow] = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for point, value in enumerate(values):
            if axis is SweepAxis.PARAM:
                ch = ChannelModel(kind=kind, param=float(value))
                block, bits, first, sent = _run_point(
                    scheme, lambda i: ch, range(1, K + 1), trials, seed, (point,), pool, tick
                )
                mean_tx = float(sent.sum()) / trials if stop_rule is StopRule.ACK else float(K)
                p_stop = _stop_probabilities(first, trials, K, stop_rule is StopRule.ACK)
                for i, rate in enumerate(scheme.rates, start=1):
                    ok = first[i] if stop_rule is StopRule.ACK else trials - block[i - 1]
                    rows.append(SweepRow(
                        param=float(value), rate_index=i, rate=float(rate), trials=trials,
                        block_errors=int(block[i - 1]), bit_errors=int(bits[i - 1]),
                        mean_tx=mean_tx, throughput=float(rate) * ok / trials, p_stop=p_stop[i - 1],
                        stderr=_stderr(int(block[i - 1]), trials),
                    ))
            else:
                for i, rate in enumerate(scheme.rates, start=1):
                    ch = biawgn(sigma_from_ebn0(float(value), float(rate)))
                    block, bits, _, _ = _run_point(
                        scheme, lambda _i: ch, [i], trials, seed, (point, i), pool, tick
                    )
                    rows.append(SweepRow(
                        param=float(value), rate_index=i, rate=float(rate), trials=trials,
                        block_errors=int(block[0]), bit_errors=int(bits[0]),
                        mean_tx=float(i), throughput=float(rate) * (trials - int(block[0])) / trials,
                        p_stop=1.0 if i == K else 0.0,
                        stderr=_stderr(int(block[0]), trials),
                    ))
    finally:
        if pool is not None:
            pool.shutdown()

    return SweepResult(scheme=scheme.name, axis=axis, k=k, seed=seed, rows=tuple(rows))


def simulate(config: TrialConfig, threads: int = DEFAULT_THREADS, progress: ProgressCallback | None = None) -> SweepResult:
    """All K rates over the config's fixed per-transmission channels (param column = 0)."""
    scheme, trials, seed = config.scheme, config.trials, config.seed
    K = scheme.K
    done = 0

    def tick(n: int) -> None:
        nonlocal done
        done += n
        if progress is not None:
            progress(done, trials)

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        block, bits, first, sent = _run_point(
            scheme, config.channel, range(1, K + 1), trials, seed, (0,), pool, tick
        )
    finally:
        if pool is not None:
            pool.shutdown()

    ack = config.stop_rule is StopRule.ACK
    mean_tx = float(sent.sum()) / trials if ack else float(K)
    p_stop = _stop_probabilities(first, trials, K, ack)
    rows = tuple(
        SweepRow(
            param=0.0, rate_index=i, rate=float(rate), trials=trials,
            block_errors=int(block[i - 1]), bit_errors=int(bits[i - 1]), mean_tx=mean_tx,
            throughput=float(rate) * (first[i] if ack else trials - block[i - 1]) / trials, p_stop=p_stop[i - 1],
            stderr=_stderr(int(block[i - 1]), trials),
        )
        for i, rate in enumerate(scheme.rates, start=1)
    )
    return SweepResult(scheme=scheme.name, axis=SweepAxis.PARAM, k=scheme.k, seed=seed, rows=rows)
