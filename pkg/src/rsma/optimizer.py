"""Alternating WMMSE optimization, initialization, restarts and order search."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from . import rates as rt
from .channels import sample_array
from .model import ChannelSet, CsitModel, LayoutError, PrecoderSet, RateOutcome, StreamLayout, canonical_strategy, \
    layout_for_strategy, make_key
from .solver import solve
from .wmmse import LN2, build_subproblem

DEFAULT_ALPHAS = (0.1, 0.5, 0.9)
DEFAULT_CAP = 720


class InfeasibleScenario(RuntimeError):
    pass


class EnumerationCapExceeded(RuntimeError):
    def __init__(self, required: int, cap: int):
        super().__init__(f"enumeration needs {required} candidates, above the cap of {cap}; "
                         f"raise the cap to at least {required} or fix the order/grouping")
        self.required = required
        self.cap = cap


# -- initialization -----------------------------------------------------------

def leading_direction(Hsub: np.ndarray) -> np.ndarray:
    """Unit leading left singular vector of the matrix with columns ``Hsub`` rows.

    Degenerate top singular values are resolved by projecting the first
    (lowest-index) channel onto the dominant subspace. The phase is fixed so
    that the first channel sees a real positive gain.
    """
    Hc = Hsub.T                                   # Nt x |A|, columns h_k
    U, s, _ = np.linalg.svd(Hc, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        v = np.ones(Hc.shape[0], dtype=complex)
        return v / np.linalg.norm(v)
    tied = np.sum(s >= s[0] * (1 - 1e-9))
    if tied > 1:
        Us = U[:, :tied]
        v = Us @ (Us.conj().T @ Hc[:, 0])
        if np.linalg.norm(v) < 1e-12 * s[0]:
            v = U[:, 0]
    else:
        v = U[:, 0]
    v = v / np.linalg.norm(v)
    ip = np.vdot(Hsub[0], v)
    if abs(ip) > 1e-14:
        v = v * (abs(ip) / ip)
    return v


def level_fractions(layout: StreamLayout, alpha) -> dict[int, float]:
    """Power fraction of each level present, lowest level first in ``alpha``.

    A scalar ``alpha`` goes to the lowest level and the rest is spread
    evenly over the higher ones; a sequence is taken as one entry per level.
    """
    levels = sorted({len(a) for a in layout.keys})
    if len(levels) == 1:
        return {levels[0]: 1.0}
    a = np.atleast_1d(np.asarray(alpha, float))
    if a.size == 1:
        rest = (1.0 - a[0]) / (len(levels) - 1)
        frac = [a[0]] + [rest] * (len(levels) - 1)
    else:
        if a.size != len(levels):
            raise ValueError(f"need {len(levels)} power fractions, got {a.size}")
        frac = list(a)
    if any(f < 0 for f in frac) or abs(sum(frac) - 1.0) > 1e-9:
        raise ValueError("power fractions must lie in the simplex")
    return dict(zip(levels, frac))


def initialize_precoders(layout: StreamLayout, H, Pt: float, alpha=0.5) -> PrecoderSet:
    """MRT for single-user streams, dominant singular vector for the others.

    Each level's power share is split equally among its streams.
    """
    Hm = rt._H(H)
    if Hm.ndim == 3:
        Hm = Hm.mean(axis=0)
    frac = level_fractions(layout, alpha)
    count = {l: sum(1 for a in layout.keys if len(a) == l) for l in frac}
    P = np.zeros((layout.n_streams, Hm.shape[1]), dtype=complex)
    for i, a in enumerate(layout.keys):
        power = frac[len(a)] * Pt / count[len(a)]
        rows = Hm[[k - 1 for k in a]]
        if len(a) == 1:
            nrm = np.linalg.norm(rows[0])
            d = rows[0] / nrm if nrm > 0 else np.ones(Hm.shape[1]) / math.sqrt(Hm.shape[1])
        else:
            d = leading_direction(rows)
        P[i] = math.sqrt(power) * d
    return PrecoderSet(layout, P)


# -- alternating optimization ----------------------------------------------------

@dataclass
class AOResult:
    layout: StreamLayout
    precoders: PrecoderSet | None
    outcome: RateOutcome | None
    status: str                          # converged / max_iter / infeasible / stalled / solver_failure
    iterations: int
    trace: list = field(default_factory=list)
    initial_wsr: float | None = None
    phase1_iterations: int = 0
    alpha: object = None
    evaluation: RateOutcome | None = None   # fresh-ensemble metric for imperfect CSIT

    @property
    def wsr(self) -> float:
        out = self.evaluation if self.evaluation is not None else self.outcome
        return out.wsr if out is not None else -math.inf

    @property
    def objective(self) -> float:
        """WSR on the channels the precoders were optimized for."""
        return self.outcome.wsr if self.outcome is not None else -math.inf

    @property
    def feasible(self) -> bool:
        return self.outcome is not None

    def trace_rows(self) -> list[dict]:
        return [dict(r) for r in self.trace]


def _outcome(layout, P, Hopt, weights, thresholds, x_split=None) -> RateOutcome | None:
    if Hopt.ndim == 3:
        res = rt.evaluate_ensemble(layout, P, Hopt, weights, thresholds)
        pr = rt.stream_rates_from_pairs(layout, rt.average_pair_rates(layout, P, Hopt))
    else:
        res = rt.evaluate(layout, P, Hopt, weights, thresholds)
        pr = None
    if res is not None or x_split is None:
        return res
    # The LP missed the thresholds by rounding; use the solver's own split.
    if pr is None:
        pr = rt.stream_rates(layout, P, Hopt)
    split = {}
    for a in layout.common_keys:
        shares = {v: c for v, c in x_split.items() if v[0] == a}
        tot = sum(shares.values())
        scale = min(1.0, pr[a] / tot) if tot > 0 else 1.0
        for v, c in shares.items():
            split[v] = c * scale
    return rt.total_rates(layout, pr, split, weights)


def _fix_power(P: np.ndarray, Pt: float) -> np.ndarray:
    tot = float(np.sum(np.abs(P) ** 2))
    if tot > Pt:
        P = P * math.sqrt(Pt / tot)
    return P


def _solve_robust(problem, solver_tol):
    res = solve(problem, tol=solver_tol)
    if res.status == "optimal" or res.status == "infeasible":
        return res
    retry = solve(problem, tol=solver_tol * 100)
    if retry.status == "optimal":
        return retry
    if res.z is not None and problem.cone_violation(res.z) < 1e-6:
        return res
    return retry if retry.z is not None else res


def _extrapolate(layout, P_old, P_new, out_new, Hopt, weights, th, Pt, max_doublings: int = 12, P_older=None):
    """Safeguarded acceleration of one AO update ``P_old -> P_new``.

    Candidates are ``P_old + b (P_new - P_old)`` for b = 2, 4, ...; the
    same doubling applied to the stream powers only, with the beam directions
    of ``P_new``; and, when ``P_older -> P_old -> P_new`` are two plain
    updates, the squared extrapolation (SQUAREM) point built from them. A
    candidate is kept only if the exact WSR goes up and the QoS targets hold.

    Power-only moves matter when a common stream sits where two users' rates
    tie: linear moves break the tie, scaling the stream keeps it.
    """
    def climb(point, unit):
        # follow one path while the WSR keeps increasing
        top = (P_new, out_new, 1.0)
        beta = 1.0
        for _ in range(max_doublings):
            beta *= 2.0
            Ptry = _fix_power(point(beta), Pt)
            o = _outcome(layout, Ptry, Hopt, weights, th)
            if o is None or not _qos_met(o, th) or o.wsr <= top[1].wsr:
                break
            top = (Ptry, o, beta * unit)
        return top

    n_old = np.linalg.norm(P_old, axis=1)
    n_new = np.linalg.norm(P_new, axis=1)
    if np.any(n_old != n_new):
        dirs = P_new / np.maximum(n_new, 1e-300)[:, None]
        top = climb(lambda b: dirs * np.maximum(n_old + b * (n_new - n_old), 0.0)[:, None], 1.0)
        if top[2] != 1.0:
            return top
    paths = [climb(lambda b: P_old + b * (P_new - P_old), 1.0)]
    if P_older is not None:
        r = P_old - P_older
        v = P_new - 2.0 * P_old + P_older
        nv = np.linalg.norm(v)
        if nv > 0:
            a = -max(1.0, np.linalg.norm(r) / nv)
            Psq = P_older - 2.0 * a * r + a * a * v
            # b = 2 lands on the SQUAREM point, larger b continue past it
            paths.append(climb(lambda b: P_new + 0.5 * b * (Psq - P_new), -a))
    return max(paths, key=lambda t: t[1].wsr)


def _qos_met(out: RateOutcome | None, thresholds, slack=1e-6) -> bool:
    if out is None:
        return False
    return all(t >= r - slack for t, r in zip(out.totals, thresholds))


def ao_maximize(
    layout: StreamLayout,
    H,
    Pt: float,
    weights: Sequence[float],
    thresholds: Sequence[float] | None = None,
    P0: PrecoderSet | np.ndarray | None = None,
    alpha=0.5,
    tol: float = 1e-4,
    max_iter: int = 200,
    solver_tol: float = 1e-8,
    zero_streams: Sequence = (),
    eval_samples: int = 1000,
    phase1_max_iter: int = 100,
    accelerate: bool = True,
) -> AOResult:
    """Maximize WSR for a fixed layout by alternating WMMSE updates.

    ``H`` is a :class:`ChannelSet`, an (M, K, Nt) stack of realizations, or
    a :class:`CsitModel`. A model is optimized on its own ``M`` samples and
    additionally scored on ``eval_samples`` fresh ones.

    With ``accelerate`` each update P_old -> P_new is followed by trial
    points ``P_old + b (P_new - P_old)`` for b = 2, 4, 8, ... (projected onto
    the power ball), kept only while the exact WSR keeps increasing and the
    QoS targets stay met. Streams whose optimal power is zero otherwise
    decay geometrically and take hundreds of iterations to switch off.
    """
    model = None
    if isinstance(H, CsitModel):
        model = H
        Hopt = sample_array(model)
    else:
        Hopt = rt._H(H)
    K = layout.K
    weights = tuple(float(w) for w in weights)
    # the subproblem's minimizer does not depend on the weight scale; keep its objective O(1)
    w_sub = tuple(w / max(max(weights), 1e-300) for w in weights)
    th = tuple(float(t) for t in (thresholds if thresholds is not None else [0.0] * K))
    has_qos = any(t > 0 for t in th)
    zero_streams = [make_key(a) for a in zero_streams]

    if P0 is None:
        P = initialize_precoders(layout, Hopt, Pt, alpha).P.copy()
    else:
        P = np.array(rt._P(P0), dtype=complex)
    for a in zero_streams:
        P[layout.index(a)] = 0.0

    init = _outcome(layout, P, Hopt, weights, th)
    initial_wsr = init.wsr if init is not None and _qos_met(init, th) else None

    # phase 1: find a point meeting the QoS targets when the start does not
    phase1_iters = 0
    if has_qos and initial_wsr is None:
        margin = tuple(t + 1e-6 if t > 0 else 0.0 for t in th)
        best_short = math.inf
        stall = 0
        while phase1_iters < phase1_max_iter:
            prob = build_subproblem(layout, Hopt, P, weights, margin, Pt, zero_streams, phase1=True)
            res = _solve_robust(prob, solver_tol)
            phase1_iters += 1
            if res.z is None:
                break
            P = _fix_power(res.P, Pt)
            short = float(np.sum(prob.unpack(res.z)[3]))
            if short <= 1e-9:
                break
            stall = stall + 1 if short > best_short - 1e-7 else 0
            best_short = min(best_short, short)
            if stall >= 5:
                break
        init = _outcome(layout, P, Hopt, weights, th)
        if not _qos_met(init, th):
            return AOResult(layout, None, None, "infeasible", 0, [], None, phase1_iters, alpha)
        initial_wsr = init.wsr

    trace = []
    best_P, best_out = (P.copy(), init) if initial_wsr is not None else (None, None)
    prev = initial_wsr
    P_older = None
    status = "max_iter"
    n = 0
    while n < max_iter:
        prob = build_subproblem(layout, Hopt, P, w_sub, th, Pt, zero_streams)
        res = _solve_robust(prob, solver_tol)
        n += 1
        if res.status == "infeasible" or res.z is None:
            if best_out is None:
                status = "infeasible" if res.status == "infeasible" else "solver_failure"
            else:
                status = "solver_failure"
            trace.append({"iteration": n, "wsr": None, "solver_status": res.status})
            break
        Pn = _fix_power(res.P, Pt)
        x_split = {v: max(-xv, 0.0) / LN2 for v, xv in zip(prob.x_vars, res.x)}
        out = _outcome(layout, Pn, Hopt, weights, th, x_split)
        step = 1.0
        if accelerate and prev is not None and out.wsr >= prev:
            Pn, out, step = _extrapolate(layout, P, Pn, out, Hopt, weights, th, Pt, P_older=P_older)
        if prev is not None and out.wsr < prev - 1e-12:
            # an inexact solve went backwards: reject it, keep the current iterate and stop
            trace.append({"iteration": n, "wsr": prev, "solver_status": res.status, "step": 0.0,
                          "rejected_wsr": out.wsr})
            status = "converged" if prev - out.wsr <= tol else "stalled"
            break
        trace.append({"iteration": n, "wsr": out.wsr, "solver_status": res.status, "step": step})
        if best_out is None or out.wsr > best_out.wsr:
            best_P, best_out = Pn.copy(), out
        if prev is not None and abs(out.wsr - prev) <= tol:
            status = "converged"
            P = Pn
            break
        prev = out.wsr
        P_older = P if step == 1.0 else None     # SQUAREM needs two plain updates
        P = Pn

    if best_out is None:
        return AOResult(layout, None, None, status, n, trace, initial_wsr, phase1_iters, alpha)
    result = AOResult(layout, PrecoderSet(layout, best_P), best_out, status, n, trace, initial_wsr,
                      phase1_iters, alpha)
    if model is not None:
        Heval = sample_array(model.with_samples(eval_samples, model.seed), start=model.M)
        result.evaluation = _outcome(layout, best_P, Heval, weights, [0.0] * K)
    return result


def sub_layout_starts(layout: StreamLayout, H, Pt: float, alphas: Sequence = DEFAULT_ALPHAS,
                      max_users: int = 4) -> list[tuple[str, np.ndarray]]:
    """Initial points shaped like the strategies a layout contains.

    For every MU-LP (on all users or a subset of them), 1-layer RS or
    SC-SIC chain layout whose streams are a strict subset of ``layout``, that
    strategy's own initialization is embedded with zero power on the
    remaining streams.
    """
    K = layout.K
    subs = [("mulp", layout_for_strategy("mulp", K))]
    if K <= max_users:
        # private streams for a strict subset of users; breaks symmetric saddles
        for size in range(1, K):
            for S in itertools.combinations(range(1, K + 1), size):
                subs.append(("mulp " + "".join(map(str, S)), StreamLayout(K, tuple((k,) for k in S),
                                                                         strategy="mulp")))
    if K >= 2:
        subs.append(("rs1", layout_for_strategy("rs1", K)))
    if 2 <= K <= max_users:
        for perm in itertools.permutations(range(1, K + 1)):
            subs.append(("sc-sic " + "".join(map(str, perm)), layout_for_strategy("sc-sic", K, order=perm)))
    have = set(layout.keys)
    out = []
    for name, sub in subs:
        if not set(sub.keys) < have:
            continue
        levels = {len(a) for a in sub.keys}
        for a in (alphas if len(levels) > 1 else alphas[:1]):
            init = initialize_precoders(sub, H, Pt, a)
            P = np.zeros((layout.n_streams, init.P.shape[1]), dtype=complex)
            for i, key in enumerate(sub.keys):
                P[layout.index(key)] = init.P[i]
            out.append((f"{name} a={a}", P))
    return out


def multi_start(layout: StreamLayout, H, Pt: float, weights, thresholds=None,
                alphas: Sequence = DEFAULT_ALPHAS, sub_starts: bool = True, **kw) -> AOResult:
    """Run AO from several initial points and keep the best feasible run.

    The starts are the MRT/SVD initialization at each power split in
    ``alphas`` and, with ``sub_starts``, the initializations of every
    simpler strategy embedded in the layout.
    """
    levels = {len(a) for a in layout.keys}
    starts = [(a, None) for a in (alphas if len(levels) > 1 else alphas[:1])]
    if sub_starts:
        Hm = H.estimate.H if isinstance(H, CsitModel) else rt._H(H)
        starts += [(name, P0) for name, P0 in sub_layout_starts(layout, Hm, Pt, alphas)]
    best = None
    for a, P0 in starts:
        if P0 is None:
            res = ao_maximize(layout, H, Pt, weights, thresholds, alpha=a, **kw)
        else:
            res = ao_maximize(layout, H, Pt, weights, thresholds, P0=P0, **kw)
            res.alpha = a
        if best is None or (res.feasible and (not best.feasible or res.objective > best.objective + 1e-12)):
            best = res
    return best


# -- combinatorial search -------------------------------------------------------

def set_partitions(items: Sequence[int]) -> Iterator[list[tuple[int, ...]]]:
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [(first,)] + part
        for i in range(len(part)):
            yield part[:i] + [tuple(sorted((first,) + part[i]))] + part[i + 1:]


def candidate_layouts(strategy: str, K: int, grouping=None, order=None,
                      cap: int = DEFAULT_CAP) -> list[StreamLayout]:
    """All layouts a strategy must try (decoding orders, groupings)."""
    tag = canonical_strategy(strategy)
    users = list(range(1, K + 1))
    if tag == "sc-sic":
        orders = [order] if order is not None else list(itertools.permutations(users))
        _check_cap(len(orders), cap)
        return [layout_for_strategy(tag, K, order=o) for o in orders]
    if tag == "sc-sic-group":
        groupings = [grouping] if grouping is not None else list(set_partitions(users))
        combos = []
        for g in groupings:
            if order is not None and grouping is not None:
                combos.append((g, order))
                continue
            per = [list(itertools.permutations(grp)) for grp in g]
            combos.extend((g, o) for o in itertools.product(*per))
        _check_cap(len(combos), cap)
        return [layout_for_strategy(tag, K, grouping=g, order=o) for g, o in combos]
    base = layout_for_strategy(tag, K, grouping=grouping)
    if tag == "rs":
        if order is not None:
            return [base.with_orders(order)]
        required = base.count_order_candidates()
        if required > cap:
            raise EnumerationCapExceeded(required, cap)
        cands = base.order_candidates()
        _check_cap(len(cands), cap)
        return [base.with_orders(o) for o in cands]
    return [base]


def _check_cap(n: int, cap: int):
    if n > cap:
        raise EnumerationCapExceeded(n, cap)


@dataclass
class SearchResult:
    best: AOResult
    runs: list                           # one AOResult per candidate layout

    @property
    def wsr(self) -> float:
        return self.best.wsr

    @property
    def layout(self) -> StreamLayout:
        return self.best.layout


def best_over_orders(strategy: str, H, Pt: float, weights, thresholds=None, grouping=None, order=None,
                     alphas: Sequence = DEFAULT_ALPHAS, cap: int = DEFAULT_CAP, sub_starts: bool = True,
                     **kw) -> SearchResult:
    """Optimize every decoding order / grouping of a strategy and keep the best."""
    Hm = H.estimate.H if isinstance(H, CsitModel) else rt._H(H)
    K = Hm.shape[-2]
    # sub-strategy starts leave the other streams of a level at zero power,
    # so the level order does not matter for them: run them once
    runs = [multi_start(lay, H, Pt, weights, thresholds, alphas, sub_starts=sub_starts and i == 0, **kw)
            for i, lay in enumerate(candidate_layouts(strategy, K, grouping, order, cap))]
    feas = [r for r in runs if r.feasible]
    if not feas:
        return SearchResult(runs[0], runs)
    best = feas[0]
    for r in feas[1:]:
        if r.objective > best.objective + 1e-12:
            best = r
    return SearchResult(best, runs)
