"""Rate-region and WSR-vs-SNR sweeps with Monte Carlo averaging.

Every sweep is a flat list of independent tasks (weight or SNR point times
channel realization). Tasks run in a process pool and are merged back in
submission order, so results do not depend on the worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .channels import ascending_gain_order
from .model import ChannelSet, CsitModel, ScenarioConfig, StreamLayout, canonical_strategy, key_label, snr_to_power
from .optimizer import DEFAULT_CAP, best_over_orders
from .presets import build_channels, schedule_for, weight_grid

_GROUPED = ("sc-sic-group", "hrs", "rs1-group")
_ORDERED = ("sc-sic", "sc-sic-group")


# -- single points ----------------------------------------------------------------

@dataclass
class PointResult:
    strategy: str
    weights: tuple
    snr_db: float
    thresholds: tuple
    rates: tuple                      # per-user totals (nan when infeasible)
    wsr: float
    layout: str
    iterations: int
    status: str
    common: tuple = ()                # per-user common-rate portions
    candidates: list = field(default_factory=list)   # (layout description, rates) of every feasible run

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


def describe_layout(layout: StreamLayout) -> str:
    """Short text form of the decoding order / grouping a run used."""
    if layout.owners:
        # SIC chains: users listed in decoding order, groups separated by '|'
        roots = [a for a in layout.keys if not any(set(a) < set(b) for b in layout.keys)]
        chains = []
        for root in sorted(roots):
            chain = sorted((a for a in layout.keys if set(a) <= set(root)), key=len, reverse=True)
            chains.append([layout.owner(a) if layout.owner(a) is not None else a[0] for a in chain])
        return "|".join(">".join(str(u) for u in seq) for seq in chains)
    # private streams are decoded last and alone, so level 1 carries no choice
    parts = [f"L{l}:" + ",".join(key_label(a) for a in seq) for l, seq in layout.orders if l >= 2]
    return " ".join(parts) if parts else layout.strategy


def _order_arg(cfg: ScenarioConfig, tag: str, H: ChannelSet):
    if tag not in _ORDERED or cfg.order is None:
        return None
    if cfg.order == "ascending-gain":
        if tag != "sc-sic":
            raise ValueError("the ascending-gain order only applies to sc-sic")
        return tuple(ascending_gain_order(H))
    return cfg.order


def solve_point(cfg: ScenarioConfig, strategy: str, H: ChannelSet, weights=None, snr_db=None,
                thresholds=None, cap: int = DEFAULT_CAP) -> PointResult:
    """Best WSR of one strategy at one operating point.

    Fields left as ``None`` come from ``cfg``. With ``cfg.csit`` set, ``H`` is
    the channel estimate; precoders are optimized on ``M_opt`` error samples
    and scored on ``M_eval`` fresh ones.
    """
    tag = canonical_strategy(strategy)
    weights = tuple(cfg.weights if weights is None else weights)
    snr = float(cfg.snr_db if snr_db is None else snr_db)
    th = tuple(cfg.thresholds if thresholds is None else thresholds)
    Pt = snr_to_power(snr)
    kw = dict(tol=cfg.tol, max_iter=cfg.max_iter, solver_tol=cfg.solver_tol)
    Hin = H
    if cfg.csit:
        c = cfg.csit
        Hin = CsitModel.from_power(H, Pt, c.get("scales", (1.0,)), int(c.get("M_opt", 100)),
                                   int(c.get("seed", cfg.seed)), float(c.get("exponent", 0.6)))
        kw["eval_samples"] = int(c.get("M_eval", 1000))
    grouping = cfg.grouping if tag in _GROUPED else None
    alphas = tuple(cfg.alpha[:max(1, cfg.restarts)])
    search = best_over_orders(tag, Hin, Pt, weights, th, grouping=grouping, order=_order_arg(cfg, tag, H),
                              alphas=alphas, cap=cap, **kw)
    best = search.best
    iters = sum(r.iterations + r.phase1_iterations for r in search.runs)
    if not best.feasible:
        nan = (math.nan,) * len(weights)
        return PointResult(tag, weights, snr, th, nan, math.nan, describe_layout(best.layout), iters,
                           "infeasible", nan)
    out = best.evaluation if best.evaluation is not None else best.outcome
    cands = []
    for r in search.runs:
        if r.feasible:
            o = r.evaluation if r.evaluation is not None else r.outcome
            cands.append((describe_layout(r.layout), tuple(o.totals)))
    common = tuple(out.common_portion(k) for k in range(1, len(weights) + 1))
    return PointResult(tag, weights, snr, th, tuple(out.totals), float(out.wsr), describe_layout(best.layout),
                       iters, best.status, common, cands)


def _task(args):
    cfg, strategy, H, weights, snr, th, cap = args
    return solve_point(cfg, strategy, H, weights, snr, th, cap)


def run_tasks(tasks: list, workers: int | None = 1) -> list[PointResult]:
    """Evaluate ``_task`` arguments, in order, on ``workers`` processes."""
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(_task, tasks))


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return max(1, os.cpu_count() or 1)


# -- geometry -----------------------------------------------------------------------

def convex_hull(points) -> np.ndarray:
    """Hull vertices in counter-clockwise order.

    Degenerate inputs are handled directly: identical points give that one
    point and collinear points give the two end points.
    """
    pts = np.unique(np.atleast_2d(np.asarray(points, float)), axis=0)
    if len(pts) <= 1:
        return pts
    c = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(c, tol=1e-12 * max(1.0, np.abs(pts).max())) < 2:
        d = c @ np.linalg.svd(c)[2][0]
        return pts[[int(np.argmin(d)), int(np.argmax(d))]]
    try:
        hull = ConvexHull(pts)
    except QhullError:  # pragma: no cover - rank check above covers this
        return pts[[0, -1]]
    return pts[hull.vertices]                     # 2-D hulls come out counter-clockwise


def polygon_area(vertices) -> float:
    v = np.atleast_2d(np.asarray(vertices, float))
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _segment_distance(p, a, b) -> float:
    d = b - a
    L = float(d @ d)
    t = 0.0 if L == 0 else min(1.0, max(0.0, float((p - a) @ d) / L))
    return float(np.linalg.norm(p - (a + t * d)))


def hull_distance(vertices, point) -> float:
    """Euclidean distance from ``point`` to the hull (0 inside)."""
    v = np.atleast_2d(np.asarray(vertices, float))
    p = np.asarray(point, float)
    if len(v) == 1:
        return float(np.linalg.norm(p - v[0]))
    if len(v) == 2:
        return _segment_distance(p, v[0], v[1])
    edges = np.roll(v, -1, axis=0) - v
    cross = edges[:, 0] * (p[1] - v[:, 1]) - edges[:, 1] * (p[0] - v[:, 0])
    if np.all(cross >= 0):
        return 0.0
    return min(_segment_distance(p, v[i], v[(i + 1) % len(v)]) for i in range(len(v)))


def contains(outer, inner, slack: float = 1e-3) -> bool:
    """True when every point of ``inner`` lies within ``slack`` of hull ``outer``."""
    return all(hull_distance(outer, p) <= slack for p in np.atleast_2d(inner))


def region_polygon(points) -> np.ndarray:
    """Hull of achieved rate pairs together with the origin and axis projections.

    Time sharing and rate reduction make every such point achievable.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    if len(pts) == 0:
        return np.zeros((1, 2))
    extra = [np.zeros(2), np.array([pts[:, 0].max(), 0.0]), np.array([0.0, pts[:, 1].max()])]
    return convex_hull(np.vstack([pts] + extra))


# -- sweeps --------------------------------------------------------------------------

@dataclass
class RegionResult:
    strategy: str
    rows: list                        # one dict per weight point (rates averaged over realizations)
    points: np.ndarray                # every achieved rate pair entering the hull
    hull: np.ndarray
    area: float
    realizations: int = 1

    def wsr_at(self, u2: float) -> float:
        for r in self.rows:
            if abs(r["u2"] - u2) <= 1e-12 * max(1.0, u2):
                return r["wsr"]
        raise KeyError(u2)


def rate_region(cfg: ScenarioConfig, strategy: str, u2_grid: Sequence[float] | None = None,
                workers: int | None = 1, cap: int = DEFAULT_CAP, channels: list | None = None) -> RegionResult:
    """Two-user rate region from a sweep of the weight ``u_2`` (``u_1 = 1``).

    With several channel realizations the rates are averaged per weight before
    the hull is taken. For a single realization every decoding order's
    solution enters the hull, giving the union over orders.
    """
    if cfg.K != 2:
        raise ValueError("rate regions need K = 2")
    grid = list(weight_grid() if u2_grid is None else u2_grid)
    chans = build_channels(cfg) if channels is None else list(channels)
    tasks = [(cfg, strategy, H, (1.0, float(u2)), cfg.snr_db, cfg.thresholds, cap) for u2 in grid for H in chans]
    res = run_tasks(tasks, workers)
    n = len(chans)
    rows, pts = [], []
    for i, u2 in enumerate(grid):
        block = res[i * n:(i + 1) * n]
        ok = [r for r in block if r.feasible]
        R = np.mean([r.rates for r in ok], axis=0) if ok else np.full(2, np.nan)
        status = "infeasible" if not ok else ("ok" if len(ok) == n else "partial")
        if ok and all(r.status == "converged" for r in ok):
            status = "converged"
        rows.append({"u2": float(u2), "R1": float(R[0]), "R2": float(R[1]),
                     "wsr": float(R[0] + u2 * R[1]) if ok else math.nan,
                     "strategy": canonical_strategy(strategy),
                     "order": block[0].layout if n == 1 else "per-realization",
                     "iterations": int(sum(r.iterations for r in block)), "status": status,
                     "realizations": n, "feasible": len(ok)})
        if ok:
            pts.append(R)
            if n == 1:
                pts.extend(np.array(c[1]) for c in block[0].candidates)
    pts = np.array(pts) if pts else np.zeros((0, 2))
    hull = region_polygon(pts)
    return RegionResult(canonical_strategy(strategy), rows, pts, hull, polygon_area(hull), n)


@dataclass
class CurveResult:
    strategy: str
    rows: list                        # one dict per (SNR, realization) plus mean rows
    K: int

    def mean_rows(self) -> list[dict]:
        return [r for r in self.rows if r["realization"] == -1]

    def wsr(self) -> np.ndarray:
        return np.array([r["wsr"] for r in self.mean_rows()])

    def snrs(self) -> np.ndarray:
        return np.array([r["snr_db"] for r in self.mean_rows()])


def wsr_curve(cfg: ScenarioConfig, strategy: str, snrs: Sequence[float] | None = None,
              schedule=None, workers: int | None = 1, cap: int = DEFAULT_CAP,
              channels: list | None = None) -> CurveResult:
    """WSR of one strategy against SNR.

    ``schedule`` is a threshold schedule name or a list with one common
    threshold per SNR; ``None`` keeps ``cfg.thresholds`` at every SNR. The
    mean row of each SNR (``realization == -1``) averages the feasible
    realizations only and records how many there were.
    """
    snrs = [float(s) for s in (snrs if snrs is not None else [cfg.snr_db])]
    if schedule is None:
        ths = [tuple(cfg.thresholds)] * len(snrs)
    else:
        vals = schedule_for(schedule, snrs) if isinstance(schedule, str) else list(schedule)
        if len(vals) != len(snrs):
            raise ValueError("need one threshold per SNR")
        ths = [(float(v),) * cfg.K for v in vals]
    chans = build_channels(cfg) if channels is None else list(channels)
    tasks = [(cfg, strategy, H, cfg.weights, s, th, cap) for s, th in zip(snrs, ths) for H in chans]
    res = run_tasks(tasks, workers)
    n = len(chans)
    tag = canonical_strategy(strategy)
    rows = []
    for i, s in enumerate(snrs):
        block = res[i * n:(i + 1) * n]
        for j, r in enumerate(block):
            rows.append(_curve_row(tag, s, ths[i], j, r.rates, r.common, r.wsr, r.layout, r.iterations, r.status,
                                   1, int(r.feasible)))
        ok = [r for r in block if r.feasible]
        if ok:
            R = tuple(np.mean([r.rates for r in ok], axis=0))
            C = tuple(np.mean([r.common for r in ok], axis=0))
            w = float(np.mean([r.wsr for r in ok]))
        else:
            R = C = (math.nan,) * cfg.K
            w = math.nan
        status = "infeasible" if not ok else ("ok" if len(ok) == n else "partial")
        rows.append(_curve_row(tag, s, ths[i], -1, R, C, w, block[0].layout if n == 1 else "per-realization",
                               int(sum(r.iterations for r in block)), status, n, len(ok)))
    return CurveResult(tag, rows, cfg.K)


def _curve_row(tag, snr, th, real, rates, common, wsr, layout, iters, status, n, feas) -> dict:
    row = {"snr_db": snr, "realization": real, "threshold": th[0] if th else 0.0}
    for k, v in enumerate(rates, 1):
        row[f"R{k}"] = float(v)
    for k, v in enumerate(common, 1):
        row[f"C{k}"] = float(v)
    row.update({"wsr": float(wsr), "strategy": tag, "order": layout, "iterations": int(iters), "status": status,
                "realizations": n, "feasible": feas})
    return row


def dof_slope(snrs, sum_rates, lo: float = 20.0, hi: float = 30.0) -> float:
    """Least-squares slope of sum rate against log2(P_t) over ``[lo, hi]`` dB."""
    s = np.asarray(snrs, float)
    r = np.asarray(sum_rates, float)
    m = (s >= lo) & (s <= hi) & np.isfinite(r)
    x = np.log2(10.0 ** (s[m] / 10.0))
    return float(np.polyfit(x, r[m], 1)[0])
