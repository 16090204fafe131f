"""Independent reference implementations used as test oracles.

These are written from the rate definitions with explicit loops and hand
expanded formulas and share no code with the package.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def ip(h, p):
    return abs(np.vdot(h, p)) ** 2        # |h^H p|^2


def log2p(x):
    return math.log2(1.0 + x)


def rs2(h1, h2, pc, p1, p2):
    """Two-user 1-layer RS: (common rate, R1 private, R2 private)."""
    rc1 = log2p(ip(h1, pc) / (ip(h1, p1) + ip(h1, p2) + 1))
    rc2 = log2p(ip(h2, pc) / (ip(h2, p1) + ip(h2, p2) + 1))
    r1 = log2p(ip(h1, p1) / (ip(h1, p2) + 1))
    r2 = log2p(ip(h2, p2) / (ip(h2, p1) + 1))
    return min(rc1, rc2), r1, r2


def rs3(H, p):
    """Three-user generalized RS with 2-order decoding order 12, 13, 23.

    ``p`` maps labels '123', '12', '13', '23', '1', '2', '3' to precoders.
    Returns stream rates keyed the same way.
    """
    h1, h2, h3 = H
    a = lambda h, keys: sum(ip(h, p[k]) for k in keys) + 1
    every = ["12", "13", "23", "1", "2", "3"]
    r = {}
    r["123"] = min(log2p(ip(h, p["123"]) / a(h, every)) for h in H)
    # user 1: 12 then 13 then private
    r12_1 = log2p(ip(h1, p["12"]) / a(h1, ["13", "23", "1", "2", "3"]))
    r13_1 = log2p(ip(h1, p["13"]) / a(h1, ["23", "1", "2", "3"]))
    r1 = log2p(ip(h1, p["1"]) / a(h1, ["23", "2", "3"]))
    # user 2: 12 then 23 then private
    r12_2 = log2p(ip(h2, p["12"]) / a(h2, ["13", "23", "1", "2", "3"]))
    r23_2 = log2p(ip(h2, p["23"]) / a(h2, ["13", "1", "2", "3"]))
    r2 = log2p(ip(h2, p["2"]) / a(h2, ["13", "1", "3"]))
    # user 3: 13 then 23 then private
    r13_3 = log2p(ip(h3, p["13"]) / a(h3, ["12", "23", "1", "2", "3"]))
    r23_3 = log2p(ip(h3, p["23"]) / a(h3, ["12", "1", "2", "3"]))
    r3 = log2p(ip(h3, p["3"]) / a(h3, ["12", "1", "2"]))
    r["12"] = min(r12_1, r12_2)
    r["13"] = min(r13_1, r13_3)
    r["23"] = min(r23_2, r23_3)
    r["1"], r["2"], r["3"] = r1, r2, r3
    return r


def scsic(H, order, p):
    """SC-SIC: the message of order[i] is decoded by users order[i:], in order.

    ``p[u]`` is the precoder of user u's message. Returns per-user rates.
    """
    K = len(order)
    out = {}
    for i, u in enumerate(order):
        later = order[i + 1:]
        rates = []
        for v in order[i:]:
            h = H[v - 1]
            rates.append(log2p(ip(h, p[u]) / (sum(ip(h, p[w]) for w in later) + 1)))
        out[u] = min(rates)
    return out


def rs1(H, pc, ps):
    """1-layer RS for any K: (common rate, private rates)."""
    K = len(H)
    rc = min(log2p(ip(H[k], pc) / (sum(ip(H[k], q) for q in ps) + 1)) for k in range(K))
    rp = [log2p(ip(H[k], ps[k]) / (sum(ip(H[k], ps[j]) for j in range(K) if j != k) + 1)) for k in range(K)]
    return rc, rp


def hrs4(H, p):
    """Two-layer HRS, users {1,2} and {3,4}: keys '1234', '12', '34', '1'..'4'."""
    r = {}
    allk = ["12", "34", "1", "2", "3", "4"]
    a = lambda h, keys: sum(ip(h, p[k]) for k in keys) + 1
    r["1234"] = min(log2p(ip(h, p["1234"]) / a(h, allk)) for h in H)
    for grp, other in (("12", "34"), ("34", "12")):
        users = [int(c) for c in grp]
        r[grp] = min(log2p(ip(H[u - 1], p[grp]) / a(H[u - 1], [other, "1", "2", "3", "4"])) for u in users)
    for u in range(1, 5):
        rest = [str(v) for v in range(1, 5) if v != u]
        grp_other = "34" if u <= 2 else "12"
        r[str(u)] = log2p(ip(H[u - 1], p[str(u)]) / a(H[u - 1], [grp_other] + rest))
    return r


def bruteforce_sinr(keys, level_orders, P, H, k, A):
    """SINR from the set definition: interference = streams k has not yet removed, minus A.

    ``keys`` lists user tuples, ``level_orders`` maps level -> list of keys,
    ``P`` maps key -> precoder.
    """
    def pos(B):
        seq = level_orders.get(len(B), [B])
        return seq.index(B) if B in seq else 0
    mine = sorted([B for B in keys if k in B], key=lambda B: (-len(B), pos(B)))
    removed = set(mine[:mine.index(A)])
    h = H[k - 1]
    interf = sum(ip(h, P[B]) for B in keys if B not in removed and B != A)
    return ip(h, P[A]) / (interf + 1)


def siso_scsic_grid(h, Pt, weights, n=10_000):
    """Exhaustive power-split search for two-user SISO SC-SIC, both orders."""
    g = np.abs(np.asarray(h)) ** 2
    beta = np.linspace(0.0, 1.0, n)
    best = -np.inf
    for first, second in ((0, 1), (1, 0)):
        P1 = beta * Pt                      # power on the first-decoded message
        P2 = (1 - beta) * Pt
        r_first = np.minimum(np.log2(1 + g[first] * P1 / (g[first] * P2 + 1)),
                             np.log2(1 + g[second] * P1 / (g[second] * P2 + 1)))
        r_second = np.log2(1 + g[second] * P2)
        wsr = weights[first] * r_first + weights[second] * r_second
        best = max(best, float(wsr.max()))
    return best


def mulp_polar_grid(H, Pt, weights, n=(17, 17, 9, 17), rounds=5):
    """Grid search for two-user MU-LP with Nt = 2.

    Full power is optimal for MU-LP (scaling all precoders up raises every
    SINR). Each beam is a unit vector ``[cos a, sin a e^{j b}]`` up to a
    phase, and the power split is searched too, so the grid runs over
    (a1, b1, a2, b2) and refines the split by repeated zooming around the
    best cell.
    """
    H = np.asarray(H)
    lo = np.array([0.0, -math.pi, 0.0, -math.pi, 0.0])
    hi = np.array([math.pi / 2, math.pi, math.pi / 2, math.pi, 1.0])
    counts = list(n) + [21]
    best_val, best_x = -np.inf, None
    for _ in range(rounds):
        axes = [np.linspace(l, h_, c) for l, h_, c in zip(lo, hi, counts)]
        a1, b1, a2, b2, s = np.meshgrid(*axes, indexing="ij", sparse=True)
        p1 = np.sqrt(s * Pt)
        p2 = np.sqrt((1 - s) * Pt)
        g = {}
        for k in range(2):
            hk = np.conj(H[k])
            g[(k, 1)] = np.abs(hk[0] * p1 * np.cos(a1) + hk[1] * p1 * np.sin(a1) * np.exp(1j * b1)) ** 2
            g[(k, 2)] = np.abs(hk[0] * p2 * np.cos(a2) + hk[1] * p2 * np.sin(a2) * np.exp(1j * b2)) ** 2
        R1 = np.log2(1 + g[(0, 1)] / (g[(0, 2)] + 1))
        R2 = np.log2(1 + g[(1, 2)] / (g[(1, 1)] + 1))
        W = weights[0] * R1 + weights[1] * R2
        i = np.unravel_index(np.argmax(W), W.shape)
        if W[i] > best_val:
            best_val = float(W[i])
            best_x = np.array([ax[j] for ax, j in zip(axes, i)])
        step = (hi - lo) / (np.array(counts) - 1)
        lo = np.maximum(best_x - 2 * step, [0.0, -10, 0.0, -10, 0.0])
        hi = np.minimum(best_x + 2 * step, [math.pi / 2, 10, math.pi / 2, 10, 1.0])
        counts = [9, 9, 9, 9, 9]
    return best_val


def all_orders(K):
    return list(itertools.permutations(range(1, K + 1)))
