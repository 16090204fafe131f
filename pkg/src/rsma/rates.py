"""Forward model: SINRs, stream rates, common-rate splits and weighted sum rate.

One evaluator serves every strategy. When user k decodes stream A, the
interference is the received power of every stream k has not cancelled yet,
other than A itself. That set covers the later streams of the same level,
all lower-level streams k decodes, and every stream that does not involve k.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .model import ChannelSet, PrecoderSet, RateOutcome, StreamKey, StreamLayout, make_key


class SplitError(ValueError):
    pass


@lru_cache(maxsize=256)
def pair_table(layout: StreamLayout):
    """Index arrays for every decoding pair of a layout.

    Returns ``(pairs, users, streams, remaining)`` where ``pairs`` lists the
    (user, key) tuples, ``users``/``streams`` are 0-based indices and
    ``remaining`` is a boolean (n_pairs, n_streams) mask of the streams
    present when the pair is decoded (the decoded stream included).
    """
    pairs = layout.pairs()
    users = np.array([k - 1 for k, _ in pairs], dtype=int)
    streams = np.array([layout.index(a) for _, a in pairs], dtype=int)
    rem = np.zeros((len(pairs), layout.n_streams), dtype=bool)
    for i, (k, a) in enumerate(pairs):
        rem[i, list(layout.remaining(k, a))] = True
    for arr in (users, streams, rem):
        arr.setflags(write=False)
    return tuple(pairs), users, streams, rem


def _P(P) -> np.ndarray:
    return P.P if isinstance(P, PrecoderSet) else np.asarray(P, dtype=complex)


def _H(H) -> np.ndarray:
    return H.H if isinstance(H, ChannelSet) else np.asarray(H, dtype=complex)


def receive_gains(P, H) -> np.ndarray:
    """Complex gains ``h_k^H p_B`` with shape (..., K, n_streams)."""
    return np.conj(_H(H)) @ _P(P).T


def pair_powers(layout: StreamLayout, P, H):
    """Signal power S and residual receive power T (noise included) per pair.

    Works on a single channel (K, Nt) or a stack (M, K, Nt); the leading
    sample axis is preserved.
    """
    _, users, streams, rem = pair_table(layout)
    G = np.abs(receive_gains(P, H)) ** 2
    Gu = G[..., users, :]
    S = Gu[..., np.arange(len(users)), streams]
    T = np.sum(np.where(rem, Gu, 0.0), axis=-1) + 1.0
    return S, T


def pair_sinrs(layout: StreamLayout, P, H) -> np.ndarray:
    S, T = pair_powers(layout, P, H)
    return S / (T - S)


def pair_rates(layout: StreamLayout, P, H) -> np.ndarray:
    """log2(1 + SINR) for every pair in ``pair_table`` order."""
    return np.log2(1.0 + pair_sinrs(layout, P, H))


def sinr(stream: StreamKey, k: int, layout: StreamLayout, P, H) -> float:
    stream = make_key(stream)
    if k not in stream:
        raise ValueError(f"user {k} does not decode stream {stream}")
    pairs, *_ = pair_table(layout)
    return float(pair_sinrs(layout, P, H)[pairs.index((k, stream))])


def stream_rates_from_pairs(layout: StreamLayout, r: np.ndarray) -> dict[StreamKey, float]:
    """Per-stream rate: the minimum over the stream's users."""
    pairs, _, streams, _ = pair_table(layout)
    out = {}
    for i, a in enumerate(layout.keys):
        vals = r[..., streams == i]
        assert vals.shape[-1] > 0
        out[a] = float(np.min(vals))
    return out


def stream_rate(stream: StreamKey, layout: StreamLayout, P, H) -> float:
    return stream_rates(layout, P, H)[make_key(stream)]


def stream_rates(layout: StreamLayout, P, H) -> dict[StreamKey, float]:
    return stream_rates_from_pairs(layout, pair_rates(layout, P, H))


def average_pair_rates(layout: StreamLayout, P, Hs) -> np.ndarray:
    """Per-pair rates averaged over a stack of channel realizations."""
    r = pair_rates(layout, P, Hs)
    return r.mean(axis=0) if r.ndim == 2 else r


def total_rates(
    layout: StreamLayout,
    rates: Mapping[StreamKey, float],
    split: Mapping[tuple[StreamKey, int], float],
    weights: Sequence[float],
    tol: float = 1e-9,
) -> RateOutcome:
    """Assemble per-user totals from stream rates and a common-rate split."""
    K = layout.K
    weights = tuple(float(w) for w in weights)
    if len(weights) != K:
        raise ValueError(f"need {K} weights")
    clean = {}
    for (a, k), c in split.items():
        a = make_key(a)
        if a not in rates or len(a) < 2 or k not in layout.split_users(a):
            raise SplitError(f"split entry ({a}, {k}) is not a valid common-rate share")
        if c < -tol:
            raise SplitError(f"negative share {c} for user {k} on stream {a}")
        clean[(a, k)] = max(float(c), 0.0)
    for a in layout.common_keys:
        used = sum(c for (b, _), c in clean.items() if b == a)
        if used > rates[a] + tol:
            raise SplitError(f"stream {a}: shares sum to {used} above its rate {rates[a]}")
    private = tuple(float(max(rates[(k,)], 0.0)) if layout.has_private(k) else 0.0 for k in range(1, K + 1))
    totals = tuple(private[k - 1] + sum(c for (_, u), c in clean.items() if u == k) for k in range(1, K + 1))
    wsr = float(np.dot(weights, totals))
    return RateOutcome(dict(rates), private, clean, totals, wsr, weights)


def greedy_split(layout: StreamLayout, rates: Mapping[StreamKey, float],
                 weights: Sequence[float]) -> dict[tuple[StreamKey, int], float]:
    """WSR-optimal split without QoS: each stream goes to its heaviest eligible user."""
    split = {}
    for a in layout.common_keys:
        users = layout.split_users(a)
        best = max(users, key=lambda k: (weights[k - 1], -k))
        for k in users:
            split[(a, k)] = max(rates[a], 0.0) if k == best else 0.0
    return split


def best_split(
    layout: StreamLayout,
    rates: Mapping[StreamKey, float],
    weights: Sequence[float],
    thresholds: Sequence[float] | None = None,
) -> dict[tuple[StreamKey, int], float] | None:
    """Common-rate split maximizing WSR subject to per-user rate thresholds.

    Returns ``None`` when no split meets the thresholds.
    """
    K = layout.K
    if thresholds is None or not np.any(np.asarray(thresholds) > 0):
        return greedy_split(layout, rates, weights)
    var = [(a, k) for a in layout.common_keys for k in layout.split_users(a)]
    private = np.array([max(rates[(k,)], 0.0) if layout.has_private(k) else 0.0 for k in range(1, K + 1)])
    need = np.asarray(thresholds, float) - private
    if not var:
        return {} if np.all(need <= 1e-12) else None
    n = len(var)
    c = -np.array([weights[k - 1] for _, k in var])
    A_ub, b_ub = [], []
    for a in layout.common_keys:
        A_ub.append([1.0 if b == a else 0.0 for b, _ in var])
        b_ub.append(max(rates[a], 0.0))
    for k in range(1, K + 1):
        if need[k - 1] > 0:
            A_ub.append([-1.0 if u == k else 0.0 for _, u in var])
            b_ub.append(-need[k - 1])
    res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), bounds=[(0, None)] * n, method="highs")
    if res.status != 0:
        return None
    split = {v: float(max(x, 0.0)) for v, x in zip(var, res.x)}
    # HiGHS meets the caps only to its feasibility tolerance; scale back onto them
    for a in layout.common_keys:
        used = sum(c for (b, _), c in split.items() if b == a)
        cap = max(rates[a], 0.0)
        if used > cap:
            f = cap / used
            for v in split:
                if v[0] == a:
                    split[v] *= f
    return split


def evaluate(layout: StreamLayout, P, H, weights: Sequence[float],
             thresholds: Sequence[float] | None = None) -> RateOutcome | None:
    """Rates of a precoder design with the best common-rate split."""
    rates = stream_rates(layout, P, H)
    split = best_split(layout, rates, weights, thresholds)
    if split is None:
        return None
    return total_rates(layout, rates, split, weights)


def evaluate_ensemble(layout: StreamLayout, P, Hs, weights: Sequence[float],
                      thresholds: Sequence[float] | None = None) -> RateOutcome | None:
    """Average-rate counterpart of :func:`evaluate` over realizations ``Hs``.

    Each pair rate is averaged first; a stream's rate is the minimum of its
    users' averages and the split is chosen on those averages.
    """
    rates = stream_rates_from_pairs(layout, average_pair_rates(layout, P, Hs))
    split = best_split(layout, rates, weights, thresholds)
    if split is None:
        return None
    return total_rates(layout, rates, split, weights)
