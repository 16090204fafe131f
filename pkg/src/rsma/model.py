"""Domain types shared by every strategy, the forward model and the optimizer.

Users are labelled ``1..K``. A stream is keyed by the sorted tuple of the
users that decode it, so ``(1, 2, 3)`` is the common stream of a three-user
system and ``(2,)`` is user 2's private stream. Channel and precoder arrays
are 0-indexed: row ``k - 1`` of ``H`` belongs to user ``k``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

StreamKey = tuple[int, ...]

STRATEGIES = (
    "mulp",
    "sc-sic",
    "sc-sic-group",
    "rs",
    "rs1",
    "rs1-group",
    "hrs",
    "multicast",
)

_ALIASES = {
    "mu-lp": "mulp",
    "sdma": "mulp",
    "noma": "sc-sic",
    "scsic": "sc-sic",
    "grs": "rs",
    "generalized-rs": "rs",
    "1-layer-rs": "rs1",
    "2-layer-hrs": "hrs",
}


class LayoutError(ValueError):
    pass


def make_key(users: Iterable[int]) -> StreamKey:
    key = tuple(sorted(set(int(u) for u in users)))
    if not key:
        raise LayoutError("stream key must be a nonempty user subset")
    return key


def key_label(key: StreamKey) -> str:
    """Compact label, e.g. ``(1, 2)`` -> ``"12"``; separators appear once K >= 10."""
    if any(u >= 10 for u in key):
        return "-".join(str(u) for u in key)
    return "".join(str(u) for u in key)


def canonical_sort(keys: Iterable[StreamKey]) -> list[StreamKey]:
    # level descending, then lexicographic
    return sorted(keys, key=lambda a: (-len(a), a))


def canonical_strategy(tag: str) -> str:
    t = tag.strip().lower().replace("_", "-")
    t = _ALIASES.get(t, t)
    if t not in STRATEGIES:
        raise LayoutError(f"unknown strategy {tag!r}; expected one of {', '.join(STRATEGIES)}")
    return t


@dataclass(frozen=True)
class StreamLayout:
    """The active streams of a strategy together with their decoding orders.

    Parameters
    ----------
    K : int
        Number of users.
    keys : tuple of StreamKey
        Active streams, stored in canonical order (level descending, then
        lexicographic).
    orders : tuple of (level, tuple of StreamKey)
        Global decoding order for every level carrying two or more streams.
        A user decodes the streams of one level that contain it in the order
        they appear here.
    owners : tuple of (StreamKey, user)
        Streams whose whole rate is credited to one user (NOMA message
        assignment). Streams not listed share their rate freely among their
        users.
    """

    K: int
    keys: tuple[StreamKey, ...]
    orders: tuple[tuple[int, tuple[StreamKey, ...]], ...] = ()
    owners: tuple[tuple[StreamKey, int], ...] = ()
    strategy: str = "custom"

    def __post_init__(self):
        if self.K < 1:
            raise LayoutError("K must be >= 1")
        keys = tuple(canonical_sort(make_key(a) for a in self.keys))
        if len(set(keys)) != len(keys):
            raise LayoutError("duplicate stream keys in layout")
        for a in keys:
            if a[0] < 1 or a[-1] > self.K:
                raise LayoutError(f"stream {a} references users outside 1..{self.K}")
        object.__setattr__(self, "keys", keys)

        given = {int(l): tuple(make_key(a) for a in seq) for l, seq in self.orders}
        orders = []
        for level in sorted({len(a) for a in keys}, reverse=True):
            at_level = [a for a in keys if len(a) == level]
            if len(at_level) < 2:
                continue
            seq = given.pop(level, tuple(at_level))
            if sorted(seq) != sorted(at_level):
                raise LayoutError(f"order for level {level} is not a permutation of its streams")
            orders.append((level, tuple(seq)))
        if given:
            raise LayoutError(f"orders given for levels without multiple streams: {sorted(given)}")
        object.__setattr__(self, "orders", tuple(orders))

        owners = tuple(sorted((make_key(a), int(k)) for a, k in self.owners))
        for a, k in owners:
            if a not in keys or k not in a:
                raise LayoutError(f"owner {k} of stream {a} is not valid for this layout")
        object.__setattr__(self, "owners", owners)

        # derived lookup tables; not part of equality
        index = {a: i for i, a in enumerate(keys)}
        rank = {}
        for a in keys:
            rank[a] = 0
        for _, seq in orders:
            for pos, a in enumerate(seq):
                rank[a] = pos
        sequences = []
        for k in range(1, self.K + 1):
            mine = [a for a in keys if k in a]
            mine.sort(key=lambda a: (-len(a), rank[a]))
            sequences.append(tuple(mine))
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_sequences", tuple(sequences))

    # -- structure queries -------------------------------------------------

    @property
    def n_streams(self) -> int:
        return len(self.keys)

    @property
    def levels(self) -> list[int]:
        return sorted({len(a) for a in self.keys}, reverse=True)

    def index(self, key: StreamKey) -> int:
        return self._index[make_key(key)]

    def order(self, level: int) -> tuple[StreamKey, ...]:
        for l, seq in self.orders:
            if l == level:
                return seq
        return tuple(a for a in self.keys if len(a) == level)

    def decoding_sequence(self, k: int) -> tuple[StreamKey, ...]:
        """Streams user ``k`` decodes, in SIC order (highest level first)."""
        return self._sequences[k - 1]

    def remaining(self, k: int, key: StreamKey) -> tuple[int, ...]:
        """Indices of streams still present at user ``k`` when it decodes ``key``.

        This is every stream except those ``k`` has already cancelled, so it
        includes ``key`` itself.
        """
        seq = self.decoding_sequence(k)
        pos = seq.index(make_key(key))
        done = {self._index[a] for a in seq[:pos]}
        return tuple(i for i in range(self.n_streams) if i not in done)

    def pairs(self) -> list[tuple[int, StreamKey]]:
        """All (user, stream) pairs in which the user decodes the stream."""
        return [(k, a) for k in range(1, self.K + 1) for a in self.decoding_sequence(k)]

    def owner(self, key: StreamKey) -> int | None:
        key = make_key(key)
        for a, k in self.owners:
            if a == key:
                return k
        return None

    def split_users(self, key: StreamKey) -> tuple[int, ...]:
        """Users allowed a share of a multi-user stream's rate."""
        key = make_key(key)
        if len(key) == 1:
            return key
        k = self.owner(key)
        return (k,) if k is not None else key

    def has_private(self, k: int) -> bool:
        return (k,) in self._index

    @property
    def common_keys(self) -> tuple[StreamKey, ...]:
        return tuple(a for a in self.keys if len(a) >= 2)

    def with_orders(self, orders: Mapping[int, Sequence[StreamKey]]) -> "StreamLayout":
        return StreamLayout(self.K, self.keys, tuple(orders.items()), self.owners, self.strategy)

    def order_candidates(self) -> list[dict[int, tuple[StreamKey, ...]]]:
        """Every combination of per-level orders yielding distinct per-user SIC sequences."""
        choices = []
        for level, seq in self.orders:
            if not any(sum(1 for a in seq if k in a) >= 2 for k in range(1, self.K + 1)):
                continue
            seen = {}
            for perm in itertools.permutations(seq):
                induced = tuple(tuple(a for a in perm if k in a) for k in range(1, self.K + 1))
                seen.setdefault(induced, perm)
            choices.append([(level, p) for p in seen.values()])
        return [dict(combo) for combo in itertools.product(*choices)]

    def count_order_candidates(self) -> int:
        total = 1
        for level, seq in self.orders:
            per_user = [sum(1 for a in seq if k in a) for k in range(1, self.K + 1)]
            if max(per_user) >= 2:
                # upper bound; the exact count needs enumeration
                total *= math.factorial(len(seq))
        return total

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "strategy": self.strategy,
            "keys": [list(a) for a in self.keys],
            "orders": {str(l): [list(a) for a in seq] for l, seq in self.orders},
            "owners": [[list(a), k] for a, k in self.owners],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StreamLayout":
        return cls(
            K=int(d["K"]),
            keys=tuple(tuple(a) for a in d["keys"]),
            orders=tuple((int(l), tuple(tuple(a) for a in seq)) for l, seq in d.get("orders", {}).items()),
            owners=tuple((tuple(a), int(k)) for a, k in d.get("owners", [])),
            strategy=d.get("strategy", "custom"),
        )


def _check_partition(grouping: Sequence[Sequence[int]], K: int) -> list[StreamKey]:
    groups = [make_key(g) for g in grouping]
    flat = sorted(u for g in groups for u in g)
    if flat != list(range(1, K + 1)):
        raise LayoutError(f"grouping {grouping} is not a partition of users 1..{K}")
    return groups


def _check_permutation(order: Sequence[int], users: Sequence[int]) -> list[int]:
    order = [int(u) for u in order]
    if sorted(order) != sorted(users):
        raise LayoutError(f"order {order} is not a permutation of users {sorted(users)}")
    return order


def _chain(order: Sequence[int]) -> tuple[list[StreamKey], list[tuple[StreamKey, int]]]:
    keys, owners = [], []
    for i, u in enumerate(order):
        a = make_key(order[i:])
        keys.append(a)
        if len(a) >= 2:
            owners.append((a, u))
    return keys, owners


def layout_for_strategy(
    strategy: str,
    K: int,
    grouping: Sequence[Sequence[int]] | None = None,
    order: Sequence[int] | Sequence[Sequence[int]] | None = None,
) -> StreamLayout:
    """Build the stream layout of a named strategy.

    ``order`` is a user permutation for ``sc-sic`` and one permutation per
    group for ``sc-sic-group``; the first user in a permutation is decoded
    first. ``grouping`` is a partition of the users, required by the
    per-group strategies.
    """
    tag = canonical_strategy(strategy)
    if K < 1:
        raise LayoutError("K must be >= 1")
    users = list(range(1, K + 1))
    singles = [(k,) for k in users]
    owners: list = []

    if tag == "mulp":
        keys = singles
    elif tag == "rs":
        keys = [a for l in range(K, 0, -1) for a in itertools.combinations(users, l)]
    elif tag == "rs1":
        keys = [tuple(users)] + singles if K > 1 else singles
    elif tag == "multicast":
        keys = [tuple(users)]
    elif tag == "sc-sic":
        if order is None:
            raise LayoutError("sc-sic requires a decoding order")
        keys, owners = _chain(_check_permutation(order, users))
    elif tag in ("sc-sic-group", "hrs", "rs1-group"):
        if grouping is None:
            raise LayoutError(f"{tag} requires a user grouping")
        groups = _check_partition(grouping, K)
        if tag == "sc-sic-group":
            if order is None:
                order = [list(g) for g in groups]
            if len(order) != len(groups):
                raise LayoutError("sc-sic-group needs one decoding order per group")
            keys = []
            for g, o in zip(groups, order):
                ck, co = _chain(_check_permutation(o, g))
                keys += ck
                owners += co
        else:
            keys = [g for g in groups if len(g) >= 2] + singles
            if tag == "hrs" and tuple(users) not in keys and K > 1:
                keys = [tuple(users)] + keys
    else:  # pragma: no cover - canonical_strategy guards
        raise LayoutError(tag)
    return StreamLayout(K, tuple(keys), (), tuple(owners), tag)


# -- value types --------------------------------------------------------------


def _as_complex_rows(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim == 1:
        H = H[:, None]
    return H


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Per-user channel vectors, stored as rows: ``H[k-1] = h_k``.

    Noise power is fixed to one for every user, so ``H`` is already
    normalized by the noise standard deviation.
    """

    H: np.ndarray

    def __post_init__(self):
        H = _as_complex_rows(self.H).copy()
        if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
            raise ValueError(f"channel array must be (K, Nt), got shape {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValueError("channel entries must be finite")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def Nt(self) -> int:
        return self.H.shape[1]

    def h(self, k: int) -> np.ndarray:
        return self.H[k - 1]

    def gains(self) -> np.ndarray:
        return np.sum(np.abs(self.H) ** 2, axis=1)

    def __eq__(self, other):
        return isinstance(other, ChannelSet) and np.array_equal(self.H, other.H)

    def to_dict(self) -> dict:
        return {"H": complex_to_json(self.H)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ChannelSet":
        return cls(complex_from_json(d["H"]))


@dataclass(frozen=True, eq=False)
class CsitModel:
    """Channel estimate plus a Gaussian estimation-error model.

    ``sigma_e[k-1]`` is the error standard deviation of user ``k``; every
    entry of the error vector is circular complex Gaussian with variance
    ``sigma_e[k-1] ** 2``.
    """

    estimate: ChannelSet
    sigma_e: tuple[float, ...]
    M: int = 1000
    seed: int = 0

    def __post_init__(self):
        s = tuple(float(v) for v in np.broadcast_to(np.asarray(self.sigma_e, float), (self.estimate.K,)))
        if any(v < 0 or not math.isfinite(v) for v in s):
            raise ValueError("error standard deviations must be finite and nonnegative")
        if int(self.M) < 1:
            raise ValueError("sample count M must be >= 1")
        object.__setattr__(self, "sigma_e", s)
        object.__setattr__(self, "M", int(self.M))

    @classmethod
    def from_power(cls, estimate: ChannelSet, Pt: float, scales: Sequence[float] = (1.0,),
                   M: int = 1000, seed: int = 0, exponent: float = 0.6) -> "CsitModel":
        """Error variance ``scale_k * Pt ** -exponent`` per user."""
        scales = np.broadcast_to(np.asarray(scales, float), (estimate.K,))
        var = scales * float(Pt) ** (-exponent)
        return cls(estimate, tuple(np.sqrt(var)), M, seed)

    def __eq__(self, other):
        return (isinstance(other, CsitModel) and self.estimate == other.estimate
                and self.sigma_e == other.sigma_e and self.M == other.M and self.seed == other.seed)

    def with_samples(self, M: int, seed: int) -> "CsitModel":
        return CsitModel(self.estimate, self.sigma_e, M, seed)

    def to_dict(self) -> dict:
        return {"estimate": self.estimate.to_dict(), "sigma_e": list(self.sigma_e), "M": self.M, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CsitModel":
        return cls(ChannelSet.from_dict(d["estimate"]), tuple(d["sigma_e"]), int(d["M"]), int(d["seed"]))


@dataclass(frozen=True, eq=False)
class PrecoderSet:
    """One precoding vector per stream, rows aligned with ``layout.keys``."""

    layout: StreamLayout
    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=complex)
        if P.ndim != 2 or P.shape[0] != self.layout.n_streams:
            raise ValueError(f"precoder array must be (n_streams={self.layout.n_streams}, Nt), got {P.shape}")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    def __getitem__(self, key: StreamKey) -> np.ndarray:
        return self.P[self.layout.index(key)]

    def power(self) -> float:
        return float(np.sum(np.abs(self.P) ** 2))

    def stream_powers(self) -> dict[StreamKey, float]:
        return {a: float(np.sum(np.abs(self.P[i]) ** 2)) for i, a in enumerate(self.layout.keys)}

    def __eq__(self, other):
        return (isinstance(other, PrecoderSet) and self.layout == other.layout
                and np.array_equal(self.P, other.P))

    def to_dict(self) -> dict:
        return {"layout": self.layout.to_dict(),
                "P": {key_label(a): complex_to_json(self.P[i]) for i, a in enumerate(self.layout.keys)},
                "keys": [list(a) for a in self.layout.keys]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PrecoderSet":
        layout = StreamLayout.from_dict(d["layout"])
        P = np.array([complex_from_json(d["P"][key_label(a)]) for a in layout.keys])
        return cls(layout, P)


@dataclass(frozen=True)
class RateOutcome:
    """Rates achieved by one precoder design, in bit/s/Hz.

    ``split`` maps ``(stream, user)`` to that user's share of a multi-user
    stream's rate.
    """

    stream_rates: Mapping[StreamKey, float]
    private_rates: tuple[float, ...]
    split: Mapping[tuple[StreamKey, int], float]
    totals: tuple[float, ...]
    wsr: float
    weights: tuple[float, ...]

    def common_portion(self, k: int) -> float:
        return sum(c for (a, u), c in self.split.items() if u == k)

    def to_dict(self) -> dict:
        return {
            "stream_rates": {key_label(a): r for a, r in self.stream_rates.items()},
            "private_rates": list(self.private_rates),
            "split": [[list(a), k, c] for (a, k), c in self.split.items()],
            "totals": list(self.totals),
            "wsr": self.wsr,
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RateOutcome":
        lookup = {}
        for lbl, r in d["stream_rates"].items():
            lookup[_parse_label(lbl)] = r
        return cls(
            stream_rates=lookup,
            private_rates=tuple(d["private_rates"]),
            split={(tuple(a), int(k)): c for a, k, c in d["split"]},
            totals=tuple(d["totals"]),
            wsr=d["wsr"],
            weights=tuple(d["weights"]),
        )


def _parse_label(lbl: str) -> StreamKey:
    if "-" in lbl:
        return tuple(int(s) for s in lbl.split("-"))
    return tuple(int(c) for c in lbl)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run one WSR optimization or a sweep of them."""

    strategy: str = "rs"
    Nt: int = 2
    K: int = 2
    snr_db: float = 20.0
    weights: tuple[float, ...] = (1.0, 1.0)
    thresholds: tuple[float, ...] = (0.0, 0.0)
    channel: Mapping = field(default_factory=lambda: {"kind": "structured", "gammas": [1.0], "thetas": [math.pi / 9]})
    grouping: tuple[tuple[int, ...], ...] | None = None
    order: tuple | None = None
    alpha: tuple[float, ...] = (0.1, 0.5, 0.9)
    tol: float = 1e-4
    max_iter: int = 200
    restarts: int = 3
    solver_tol: float = 1e-8
    csit: Mapping | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", canonical_strategy(self.strategy))
        w = tuple(float(v) for v in self.weights)
        th = tuple(float(v) for v in np.broadcast_to(np.asarray(self.thresholds, float), (self.K,)))
        if len(w) != self.K:
            raise ValueError(f"need {self.K} weights, got {len(w)}")
        if any(v < 0 for v in w):
            raise ValueError("weights must be nonnegative")
        if any(v < 0 for v in th):
            raise ValueError("QoS thresholds must be nonnegative")
        if any(not 0.0 <= a <= 1.0 for a in self.alpha):
            raise ValueError("initialization splits must lie in [0, 1]")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "thresholds", th)
        if self.grouping is not None:
            object.__setattr__(self, "grouping", tuple(tuple(g) for g in self.grouping))

    @property
    def Pt(self) -> float:
        return snr_to_power(self.snr_db)

    def replace(self, **changes) -> "ScenarioConfig":
        d = self.to_dict()
        d.update(changes)
        return ScenarioConfig.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "Nt": self.Nt,
            "K": self.K,
            "snr_db": self.snr_db,
            "weights": list(self.weights),
            "thresholds": list(self.thresholds),
            "channel": dict(self.channel),
            "grouping": [list(g) for g in self.grouping] if self.grouping is not None else None,
            "order": _listify(self.order),
            "alpha": list(self.alpha),
            "tol": self.tol,
            "max_iter": self.max_iter,
            "restarts": self.restarts,
            "solver_tol": self.solver_tol,
            "csit": dict(self.csit) if self.csit is not None else None,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioConfig":
        d = dict(d)
        for name in ("weights", "thresholds", "alpha"):
            if name in d and d[name] is not None:
                d[name] = tuple(d[name])
        if d.get("order") is not None:
            d["order"] = _tuplify(d["order"])
        return cls(**d)


def _listify(x):
    if isinstance(x, (tuple, list)):
        return [_listify(v) for v in x]
    return x


def _tuplify(x):
    if isinstance(x, (tuple, list)):
        return tuple(_tuplify(v) for v in x)
    return x


def snr_to_power(snr_db: float) -> float:
    return 10.0 ** (float(snr_db) / 10.0)


def complex_to_json(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [complex_to_json(v) for v in a]


def complex_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]
