"""
polar_core.py — Arikan transform, bit-channel reliability, information sets
and successive-cancellation decoding.

Conventions:
  - P_n is the plain Kronecker power of [[1,0],[1,1]]; no bit reversal.
  - Public indices are 1-based; numpy arrays inside are 0-based.
  - Every coding routine accepts a single vector or a batch whose leading
    axis indexes independent trials.
  - Per-position channel quality may differ, so punctured positions
    (LLR 0 / erasure probability 1) need no special casing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import brentq

from channels import ChannelKind, ChannelModel, llrs, transmit
from config import BRUTE_FORCE_MAX_NU, DESIGN_SEED, MC_DESIGN_TRIALS, TRIAL_BATCH


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _require_power_of_two(n: int, what: str = "length") -> None:
    if not is_power_of_two(n):
        raise ValueError(f"{what} must be a power of two, got {n}")


# ══════════════════════════════════════════════════════════════════════════════
# Domain types
# ══════════════════════════════════════════════════════════════════════════════

class MetricKind(str, Enum):
    ERASURE_PROB = "erasure_prob"
    BHATTACHARYYA_ESTIMATE = "bhattacharyya_estimate"
    MEAN_LLR = "mean_llr"


class ReliabilityProfile(BaseModel):
    """Per-bit-channel reliability of a (possibly punctured) length-n_u code."""

    model_config = ConfigDict(frozen=True)

    n_u: int
    metric: tuple[float, ...]
    metric_kind: MetricKind
    smaller_is_better: bool

    @model_validator(mode="after")
    def _check(self) -> "ReliabilityProfile":
        _require_power_of_two(self.n_u, "n_u")
        if len(self.metric) != self.n_u:
            raise ValueError(f"metric has {len(self.metric)} entries, expected {self.n_u}")
        values = np.asarray(self.metric)
        if self.metric_kind is MetricKind.MEAN_LLR:
            if (values < 0).any():
                raise ValueError("mean-LLR entries must be >= 0")
        elif ((values < 0) | (values > 1)).any():
            raise ValueError(f"{self.metric_kind.value} entries must lie in [0, 1]")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.metric, dtype=np.float64)


class InformationSet(BaseModel):
    """Sorted 1-based positions carrying message bits."""

    model_config = ConfigDict(frozen=True)

    n_u: int
    indices: tuple[int, ...]

    @model_validator(mode="after")
    def _check(self) -> "InformationSet":
        idx = self.indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("information set indices must be strictly increasing")
        if idx and (idx[0] < 1 or idx[-1] > self.n_u):
            raise ValueError(f"information set indices must lie in [1, {self.n_u}]")
        return self

    def __len__(self) -> int:
        return len(self.indices)

    def zero_based(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64) - 1

    def mask(self) -> np.ndarray:
        m = np.zeros(self.n_u, dtype=bool)
        m[self.zero_based()] = True
        return m


class NestedSetFamily(BaseModel):
    """Information sets ordered largest first, each containing the next."""

    model_config = ConfigDict(frozen=True)

    n_u: int
    sets: tuple[InformationSet, ...]

    @model_validator(mode="after")
    def _check(self) -> "NestedSetFamily":
        for s in self.sets:
            if s.n_u != self.n_u:
                raise ValueError(f"set over n_u={s.n_u} in a family over n_u={self.n_u}")
        for t, (big, small) in enumerate(zip(self.sets, self.sets[1:])):
            if not set(small.indices) <= set(big.indices):
                raise ValueError(f"sets[{t + 1}] is not contained in sets[{t}]")
        return self

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.sets)


def profile_document(profile: ReliabilityProfile, info: InformationSet | None = None) -> dict:
    """JSON document ``{n_u, metric_kind, metric[], indices[]}``."""
    return {
        "n_u": profile.n_u,
        "metric_kind": profile.metric_kind.value,
        "metric": list(profile.metric),
        "indices": list(info.indices) if info is not None else [],
    }


# ══════════════════════════════════════════════════════════════════════════════
# Transform
# ══════════════════════════════════════════════════════════════════════════════

def polar_transform(u) -> np.ndarray:
    """x = u · P_n over GF(2), in place on a copy; works on the last axis."""
    x = np.array(u, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    _require_power_of_two(n)
    lead = x.shape[:-1]
    h = 1
    while h < n:
        v = x.reshape(lead + (n // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return x


def polar_matrix(n: int) -> np.ndarray:
    """Explicit P_n; row i is the image of the i-th unit vector."""
    return polar_transform(np.eye(n, dtype=np.uint8))


def gf2_rank(matrix) -> int:
    A = (np.asarray(matrix) & 1).astype(np.uint8, copy=True)
    m, n = A.shape
    r = 0
    for c in range(n):
        if r >= m:
            break
        rows = np.nonzero(A[r:, c])[0]
        if rows.size == 0:
            continue
        p = r + int(rows[0])
        if p != r:
            A[[r, p], :] = A[[p, r], :]
        ones = np.nonzero(A[:, c])[0]
        ones = ones[ones != r]
        if ones.size:
            A[ones, :] ^= A[r, :]
        r += 1
    return r


# ══════════════════════════════════════════════════════════════════════════════
# Reliability construction
# ══════════════════════════════════════════════════════════════════════════════

def _pattern_mask(pattern, n_u: int) -> np.ndarray:
    """Boolean 'transmitted' mask from a PuncturePattern, flag sequence or None."""
    if pattern is None:
        return np.ones(n_u, dtype=bool)
    bits = np.asarray(getattr(pattern, "bits", pattern), dtype=np.uint8)
    if bits.shape != (n_u,):
        raise ValueError(f"pattern length {bits.size} does not match n_u={n_u}")
    return bits.astype(bool)


def _polarize(values: np.ndarray, minus: Callable, plus: Callable) -> np.ndarray:
    """Apply the one-step combining rule log2(n) times, top split first."""
    z = np.array(values, dtype=np.float64, copy=True)
    n = z.size
    h = n // 2
    while h >= 1:
        v = z.reshape(n // (2 * h), 2, h)
        a, b = v[:, 0, :].copy(), v[:, 1, :].copy()
        v[:, 0, :] = minus(a, b)
        v[:, 1, :] = plus(a, b)
        h //= 2
    return z


def bec_reliability(per_position_erasure: Sequence[float]) -> ReliabilityProfile:
    """Exact bit-channel erasure probabilities for heterogeneous BEC inputs."""
    e = np.asarray(per_position_erasure, dtype=np.float64)
    _require_power_of_two(e.size, "n_u")
    if ((e < 0) | (e > 1)).any():
        raise ValueError("erasure probabilities must lie in [0, 1]")
    z = _polarize(e, minus=lambda a, b: a + b - a * b, plus=lambda a, b: a * b)
    return ReliabilityProfile(
        n_u=e.size,
        metric=tuple(np.clip(z, 0.0, 1.0).tolist()),
        metric_kind=MetricKind.ERASURE_PROB,
        smaller_is_better=True,
    )


# ── Gaussian approximation ────────────────────────────────────────────────────
# φ(x) ≈ exp(−0.4527 x^0.86 + 0.0218) for x < 10,
#        √(π/x) e^{−x/4} (1 − 10/(7x)) otherwise. Kept in the log domain so
# large means do not underflow.

_GA_SPLIT = 10.0
_LOG_PHI_AT_SPLIT = -0.4527 * _GA_SPLIT ** 0.86 + 0.0218


def _log_phi_tail(x: float) -> float:
    return 0.5 * math.log(math.pi / x) - x / 4.0 + math.log1p(-10.0 / (7.0 * x))


def _log_phi(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    low = (x > 0) & (x < _GA_SPLIT)
    out[low] = np.minimum(0.0, -0.4527 * x[low] ** 0.86 + 0.0218)
    high = x >= _GA_SPLIT
    xh = x[high]
    out[high] = 0.5 * np.log(np.pi / xh) - xh / 4.0 + np.log1p(-10.0 / (7.0 * xh))
    return out


def _inv_log_phi(ly: float) -> float:
    if ly >= -1e-12:
        return 0.0
    if ly > _LOG_PHI_AT_SPLIT:
        return ((0.0218 - ly) / 0.4527) ** (1.0 / 0.86)
    hi = max(2.0 * _GA_SPLIT, -8.0 * ly + 50.0)
    return brentq(lambda x: _log_phi_tail(x) - ly, _GA_SPLIT, hi)


def _ga_minus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # φ^{-1}(1 − (1 − φ(a))(1 − φ(b)))
    la, lb = _log_phi(a), _log_phi(b)
    lsum = np.logaddexp(la, lb)
    ly = lsum + np.log1p(-np.exp(la + lb - lsum))
    return np.array([_inv_log_phi(float(v)) for v in ly.ravel()]).reshape(ly.shape)


def gaussian_reliability(sigma: float, n_u: int, pattern=None) -> ReliabilityProfile:
    """Mean-LLR profile by Gaussian-approximation density evolution."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    _require_power_of_two(n_u, "n_u")
    sent = _pattern_mask(pattern, n_u)
    init = np.where(sent, 2.0 / sigma ** 2, 0.0)
    means = _polarize(init, minus=_ga_minus, plus=lambda a, b: a + b)
    return ReliabilityProfile(
        n_u=n_u,
        metric=tuple(np.maximum(means, 0.0).tolist()),
        metric_kind=MetricKind.MEAN_LLR,
        smaller_is_better=False,
    )


def monte_carlo_reliability(
    ch: ChannelModel,
    n_u: int,
    pattern=None,
    trials: int = MC_DESIGN_TRIALS,
    rng: np.random.Generator | None = None,
) -> ReliabilityProfile:
    """
    Genie-aided SC error-rate estimate of every bit-channel.

    The all-zero codeword is sent; punctured positions get LLR 0. A leaf LLR
    of exactly 0 counts as half an error (fair coin).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    _require_power_of_two(n_u, "n_u")
    rng = rng if rng is not None else np.random.default_rng(DESIGN_SEED)
    sent = _pattern_mask(pattern, n_u)
    errors = np.zeros(n_u, dtype=np.float64)

    done = 0
    while done < trials:
        b = min(TRIAL_BATCH, trials - done)
        full = np.zeros((b, n_u), dtype=np.float64)
        y = transmit(ch, np.zeros((b, int(sent.sum())), dtype=np.uint8), rng)
        full[:, sent] = llrs(ch, y)
        leaf = genie_leaf_llrs(full, np.zeros((b, n_u), dtype=np.uint8))
        errors += (leaf < 0).sum(axis=0) + 0.5 * (leaf == 0).sum(axis=0)
        done += b

    return ReliabilityProfile(
        n_u=n_u,
        metric=tuple((errors / trials).tolist()),
        metric_kind=MetricKind.BHATTACHARYYA_ESTIMATE,
        smaller_is_better=True,
    )


def _transition_matrix(ch: ChannelModel) -> np.ndarray:
    """W(y|x) as a (2, |Y|) table; BEC outputs are (0, 1, erasure)."""
    if ch.kind is ChannelKind.BEC:
        e = ch.param
        return np.array([[1 - e, 0.0, e], [0.0, 1 - e, e]])
    if ch.kind is ChannelKind.BSC:
        p = ch.param
        return np.array([[1 - p, p], [p, 1 - p]])
    raise ValueError("brute-force enumeration needs a finite output alphabet (BEC or BSC)")


def _bit_channel_law(ch: ChannelModel, n_u: int, pattern, j: int) -> np.ndarray:
    """
    W(y^n, u^{j-1} | u_j) as a (2^{j-1}, 2, |Y|^n) table, by full enumeration
    over the transmitted positions; only feasible for tiny n_u.
    """
    W = _transition_matrix(ch)
    _require_power_of_two(n_u, "n_u")
    if n_u > BRUTE_FORCE_MAX_NU:
        raise ValueError(f"n_u={n_u} exceeds the enumeration limit {BRUTE_FORCE_MAX_NU}")
    if not 1 <= j <= n_u:
        raise ValueError(f"bit-channel index must lie in [1, {n_u}], got {j}")
    sent = np.nonzero(_pattern_mask(pattern, n_u))[0]

    # u_1 is the most significant bit so prefixes group contiguously
    shifts = n_u - 1 - np.arange(n_u)
    U = ((np.arange(2 ** n_u)[:, None] >> shifts) & 1).astype(np.uint8)
    X = polar_transform(U)[:, sent]

    alphabet = W.shape[1]
    Y = np.indices((alphabet,) * sent.size).reshape(sent.size, -1).T
    like = np.ones((U.shape[0], Y.shape[0]))
    for t in range(sent.size):
        like *= W[X[:, t]][:, Y[:, t]]

    return like.reshape(2 ** (j - 1), 2, 2 ** (n_u - j), -1).sum(axis=2) / 2 ** (n_u - 1)


def brute_force_bit_channel(ch: ChannelModel, n_u: int, pattern=None, j: int = 1) -> float:
    """Exact Bhattacharyya parameter of bit-channel j."""
    w = _bit_channel_law(ch, n_u, pattern, j)
    return float(np.sqrt(w[:, 0, :] * w[:, 1, :]).sum())


def brute_force_error_probability(ch: ChannelModel, n_u: int, pattern=None, j: int = 1) -> float:
    """
    Exact genie-aided SC error probability of bit-channel j, ties counted as
    half an error; the quantity monte_carlo_reliability estimates.
    """
    w = _bit_channel_law(ch, n_u, pattern, j)
    return float(0.5 * np.minimum(w[:, 0, :], w[:, 1, :]).sum())


def reliability_for(
    ch: ChannelModel,
    n_u: int,
    pattern=None,
    rng: np.random.Generator | None = None,
    trials: int = MC_DESIGN_TRIALS,
) -> ReliabilityProfile:
    """Design profile per channel family; punctured positions are useless channels."""
    sent = _pattern_mask(pattern, n_u)
    if ch.kind is ChannelKind.BEC:
        return bec_reliability(np.where(sent, ch.param, 1.0))
    if ch.kind is ChannelKind.BIAWGN:
        return gaussian_reliability(ch.param, n_u, sent)
    return monte_carlo_reliability(ch, n_u, sent, trials=trials, rng=rng)


# ══════════════════════════════════════════════════════════════════════════════
# Information sets
# ══════════════════════════════════════════════════════════════════════════════

def reliability_order(profile: ReliabilityProfile) -> np.ndarray:
    """0-based positions from most to least reliable; ties prefer the larger index."""
    metric = profile.as_array()
    key = metric if profile.smaller_is_better else -metric
    idx = np.arange(profile.n_u)
    return np.lexsort((-idx, key))


def select_information_set(profile: ReliabilityProfile, size: int) -> InformationSet:
    if not 0 <= size <= profile.n_u:
        raise ValueError(f"information set size must lie in [0, {profile.n_u}], got {size}")
    chosen = np.sort(reliability_order(profile)[:size]) + 1
    return InformationSet(n_u=profile.n_u, indices=tuple(int(i) for i in chosen))


def nested_information_sets(
    profiles: Sequence[ReliabilityProfile], sizes: Sequence[int]
) -> NestedSetFamily:
    """
    Chain of nested sets, best channel first.

    The smallest set is picked under the worst channel's profile; each
    larger set keeps it and adds the best remaining positions under its own
    channel's profile.
    """
    if len(profiles) != len(sizes) or not profiles:
        raise ValueError(f"need one size per profile, got {len(sizes)} sizes for {len(profiles)} profiles")
    n_u = profiles[0].n_u
    if any(p.n_u != n_u for p in profiles):
        raise ValueError("all profiles must share the same n_u")
    if any(b > a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be non-increasing, got {tuple(sizes)}")
    if sizes[0] > n_u or sizes[-1] < 0:
        raise ValueError(f"sizes must lie in [0, {n_u}], got {tuple(sizes)}")

    chosen: list[int] = []
    members: set[int] = set()
    sets: list[InformationSet] = []
    for profile, size in zip(reversed(profiles), reversed(sizes)):
        for pos in reliability_order(profile):
            if len(chosen) >= size:
                break
            if int(pos) not in members:
                members.add(int(pos))
                chosen.append(int(pos))
        sets.append(InformationSet(n_u=n_u, indices=tuple(sorted(p + 1 for p in chosen))))

    return NestedSetFamily(n_u=n_u, sets=tuple(reversed(sets)))


# ══════════════════════════════════════════════════════════════════════════════
# Successive cancellation
# ══════════════════════════════════════════════════════════════════════════════

def _f_tanh(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # 2·atanh(tanh(a/2)·tanh(b/2)) in its overflow-free form. The magnitude
    # depends on |a| and |b| only, so f is exactly odd in each argument and
    # mirrored inputs cancel to an exact 0 in g.
    abs_a, abs_b = np.abs(a), np.abs(b)
    magnitude = (
        np.minimum(abs_a, abs_b)
        + np.log1p(np.exp(-(abs_a + abs_b)))
        - np.log1p(np.exp(-np.abs(abs_a - abs_b)))
    )
    return np.sign(a) * np.sign(b) * magnitude


def _f_minsum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


_CHECK_RULES = {"tanh": _f_tanh, "minsum": _f_minsum}


def _g(a: np.ndarray, b: np.ndarray, bits: np.ndarray) -> np.ndarray:
    return b + np.where(bits.astype(bool), -a, a)


def _sc_node(llr, frozen_mask, frozen_vals, u_out, leaf_out, tie_out, f) -> np.ndarray:
    """Decode one subtree; writes u decisions into u_out and returns its codeword."""
    n = llr.shape[1]
    if n == 1:
        L = llr[:, 0]
        if leaf_out is not None:
            leaf_out[:, 0] = L
        if frozen_mask[0]:
            bit = frozen_vals[:, 0].copy()
        else:
            bit = (L < 0).astype(np.uint8)
            tie_out |= L == 0
        u_out[:, 0] = bit
        return bit[:, None]

    if leaf_out is None and frozen_mask.all():
        u_out[:] = frozen_vals
        return polar_transform(frozen_vals)

    h = n // 2
    left, right = llr[:, :h], llr[:, h:]
    sub = (lambda arr, s: arr[:, s] if arr is not None else None)
    lo, hi = slice(0, h), slice(h, n)
    v1 = _sc_node(f(left, right), frozen_mask[lo], frozen_vals[:, lo], u_out[:, lo],
                  sub(leaf_out, lo), tie_out, f)
    v2 = _sc_node(_g(left, right, v1), frozen_mask[hi], frozen_vals[:, hi], u_out[:, hi],
                  sub(leaf_out, hi), tie_out, f)
    return np.concatenate([v1 ^ v2, v2], axis=1)


@dataclass(frozen=True)
class SCResult:
    """Output of sc_decode; arrays carry a leading batch axis iff the input did."""

    info_bits: np.ndarray
    codeword: np.ndarray
    u_hat: np.ndarray
    confident: np.ndarray | bool


def _frozen_values(frozen, info_mask: np.ndarray, batch: int) -> np.ndarray:
    n_u = info_mask.size
    vals = np.zeros((batch, n_u), dtype=np.uint8)
    if frozen is None:
        return vals
    if isinstance(frozen, Mapping):
        keys = {int(k) for k in frozen}
        expected = {int(i) + 1 for i in np.nonzero(~info_mask)[0]}
        if keys != expected:
            raise ValueError("frozen positions and information positions must partition [n_u]")
        for pos, value in frozen.items():
            vals[:, int(pos) - 1] = int(value) & 1
        return vals
    arr = np.asarray(frozen, dtype=np.uint8)
    vals[:] = np.broadcast_to(arr, (batch, n_u))
    vals[:, info_mask] = 0
    return vals


def sc_decode(llrs_in, frozen=None, info_positions=None, rule: str = "tanh") -> SCResult:
    """
    Successive-cancellation decoding.

    llrs_in         — (n_u,) or (B, n_u) channel LLRs, 0 at punctured positions
    frozen          — {position: bit} over the complement of the information
                      set, or an array of frozen values (per trial allowed);
                      None freezes every non-information position to 0
    info_positions  — InformationSet or 1-based positions
    rule            — "tanh" (exact) or "minsum"

    Information decisions at LLR 0 resolve to bit 0.
    """
    L = np.asarray(llrs_in, dtype=np.float64)
    single = L.ndim == 1
    L = np.atleast_2d(L)
    batch, n_u = L.shape
    _require_power_of_two(n_u)
    if not np.isfinite(L).all():
        raise ValueError("LLRs must be finite")
    if rule not in _CHECK_RULES:
        raise ValueError(f"Unknown SC rule '{rule}'. Must be one of {sorted(_CHECK_RULES)}")

    if isinstance(info_positions, InformationSet):
        info = info_positions
    else:
        positions = () if info_positions is None else np.asarray(info_positions).ravel()
        info = InformationSet(n_u=n_u, indices=tuple(sorted(int(i) for i in positions)))
    if info.n_u != n_u:
        raise ValueError(f"information set is over n_u={info.n_u}, LLRs have length {n_u}")
    info_mask = info.mask()

    vals = _frozen_values(frozen, info_mask, batch)
    u_hat = np.zeros((batch, n_u), dtype=np.uint8)
    tied = np.zeros(batch, dtype=bool)
    x_hat = _sc_node(L, ~info_mask, vals, u_hat, None, tied, _CHECK_RULES[rule])

    info_bits = u_hat[:, info_mask]
    if single:
        return SCResult(info_bits[0], x_hat[0], u_hat[0], bool(not tied[0]))
    return SCResult(info_bits, x_hat, u_hat, ~tied)


def genie_leaf_llrs(llrs_in, u_true, rule: str = "tanh") -> np.ndarray:
    """Leaf LLRs of SC decoding when every earlier decision is the true bit."""
    L = np.atleast_2d(np.asarray(llrs_in, dtype=np.float64))
    u = np.atleast_2d(np.asarray(u_true, dtype=np.uint8))
    batch, n_u = L.shape
    leaf = np.zeros((batch, n_u), dtype=np.float64)
    scratch = np.zeros((batch, n_u), dtype=np.uint8)
    tied = np.zeros(batch, dtype=bool)
    _sc_node(L, np.ones(n_u, dtype=bool), np.broadcast_to(u, (batch, n_u)).copy(),
             scratch, leaf, tied, _CHECK_RULES[rule])
    return leaf
