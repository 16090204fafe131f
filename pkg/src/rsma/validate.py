"""Quick invariant checks behind the ``validate`` command."""
from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rates as rt
from .channels import crandn, random_channels, _rng
from .io import read_csv, write_csv
from .model import layout_for_strategy
from .optimizer import ao_maximize, candidate_layouts
from .sweep import convex_hull
from .wmmse import augmented_wmse, mmse_equalizers, mmse_weights, mses


@dataclass
class Check:
    name: str
    ok: bool
    detail: str


def _random_case(rng, layout, Nt):
    H = crandn(rng, (layout.K, Nt))
    P = crandn(rng, (layout.n_streams, Nt))
    P *= math.sqrt(rng.uniform(1.0, 100.0) / np.sum(np.abs(P) ** 2))
    return H, P


def check_rate_wmmse(n: int = 200, seed: int = 0) -> Check:
    layouts = [layout_for_strategy("mulp", 3), layout_for_strategy("sc-sic", 3, order=(1, 2, 3)),
               layout_for_strategy("rs", 3), layout_for_strategy("rs1", 4)]
    worst = 0.0
    below = 0
    for i in range(n):
        rng = _rng(seed, 7, i)
        lay = layouts[i % len(layouts)]
        H, P = _random_case(rng, lay, 3)
        g = mmse_equalizers(lay, P, H)
        u = mmse_weights(lay, P, H)
        xi = augmented_wmse(mses(lay, P, H, g), u)
        r = rt.pair_rates(lay, P, H) * math.log(2)
        worst = max(worst, float(np.max(np.abs(xi - (1 - r)))))
        # any other (g, u) does no better
        g2 = g * (1 + 0.1 * crandn(rng, g.shape))
        u2 = u * np.exp(0.1 * rng.standard_normal(u.shape))
        below += int(np.sum(augmented_wmse(mses(lay, P, H, g2), u2) < xi - 1e-12))
    return Check("rate-wmmse identity", worst <= 1e-9 and below == 0,
                 f"max |xi - (1 - R)| = {worst:.2e}, perturbed points below minimum: {below}")


def check_decoding_sequences() -> Check:
    bad = 0
    for lay in candidate_layouts("rs", 3) + candidate_layouts("sc-sic-group", 4):
        for k in range(1, lay.K + 1):
            for level, seq in lay.orders:
                mine = [a for a in lay.decoding_sequence(k) if len(a) == level]
                if mine != [a for a in seq if k in a]:
                    bad += 1
    return Check("decoding subsequence property", bad == 0, f"violations: {bad}")


def check_ao(seed: int = 0) -> Check:
    H = random_channels(2, [1.0, 0.5], seed)
    res = ao_maximize(layout_for_strategy("rs", 2), H, 100.0, (1.0, 1.0))
    w = [t["wsr"] for t in res.trace]
    steps = [b - a for a, b in zip([res.initial_wsr] + w[:-1], w)]
    power = res.precoders.power()
    ok = min(steps) >= -1e-8 and power <= 100.0 * (1 + 1e-6) and res.status == "converged"
    return Check("AO monotone and power-feasible", ok,
                 f"{res.iterations} iterations, min step {min(steps):.1e}, power {power:.6f}/100, {res.status}")


def check_hull(seed: int = 0) -> Check:
    rng = _rng(seed, 8)
    bad = 0
    for _ in range(50):
        v = convex_hull(rng.uniform(0, 1, (30, 2)))
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        bad += int(np.any(cross <= 0))
    return Check("hull convexity", bad == 0, f"non-convex hulls: {bad}/50")


def check_round_trip() -> Check:
    rows = [{"u2": 0.1 * i + 1e-17, "R1": math.pi / (i + 1), "wsr": math.nan if i == 2 else i / 3.0,
             "strategy": "rs", "iterations": i} for i in range(5)]
    with tempfile.TemporaryDirectory() as d:
        _, back = read_csv(write_csv(Path(d) / "t.csv", rows))
    same = all(
        all((a[c] == b[c]) or (isinstance(a[c], float) and math.isnan(a[c]) and math.isnan(b[c])) for c in a)
        for a, b in zip(rows, back))
    return Check("CSV round trip", same and len(back) == len(rows), "bit-identical" if same else "mismatch")


def run_all(seed: int = 0) -> list[Check]:
    return [check_rate_wmmse(seed=seed), check_decoding_sequences(), check_ao(seed), check_hull(seed),
            check_round_trip()]
