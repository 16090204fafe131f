"""MSE/WMMSE quantities and the convex precoder subproblem.

Weights use natural logarithms: the augmented WMSE is ``xi = u * eps - ln u``.
At the MMSE equalizer and ``u = 1 / eps`` this gives ``xi = 1 - R`` with R
in nats, and ``u = 1 / eps`` is then the exact minimizer over u, which is
what makes the alternating scheme monotone. Rates cross the module
boundary in bit/s/Hz; the subproblem works in nats internally.

The subproblem is emitted in the standard conic form used by
``cvxopt.solvers.conelp``::

    minimize    c' z
    subject to  G z + s = h,  s in K (nonnegative orthant x second-order cones)
                A z = b

with ``z = [Re vec(P), Im vec(P), x, t, slack]``. Each convex quadratic
``q(P) <= r(z)`` becomes the rotated cone ``||a||^2 <= w`` and is stored as
the second-order cone ``||(2a, w - 1)|| <= w + 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import StreamKey, StreamLayout, make_key
from .rates import _H, _P, pair_powers, pair_table, receive_gains

LN2 = math.log(2.0)


# -- closed forms (vectorized over pairs, optionally over samples) -------------

def _pair_gains(layout: StreamLayout, P, H) -> np.ndarray:
    """``h_k^H p_A`` for every decoding pair."""
    _, users, streams, _ = pair_table(layout)
    return receive_gains(P, H)[..., users, streams]


def mmse_equalizers(layout: StreamLayout, P, H) -> np.ndarray:
    S, T = pair_powers(layout, P, H)
    return np.conj(_pair_gains(layout, P, H)) / T


def mses(layout: StreamLayout, P, H, g) -> np.ndarray:
    """eps = |g|^2 T - 2 Re{g h^H p_A} + 1 for every pair."""
    _, T = pair_powers(layout, P, H)
    hp = _pair_gains(layout, P, H)
    g = np.asarray(g, dtype=complex)
    return np.abs(g) ** 2 * T - 2.0 * np.real(g * hp) + 1.0


def mmse_mses(layout: StreamLayout, P, H) -> np.ndarray:
    """eps at the MMSE equalizer, i.e. I / T."""
    S, T = pair_powers(layout, P, H)
    return (T - S) / T


def mmse_weights(layout: StreamLayout, P, H) -> np.ndarray:
    return 1.0 / mmse_mses(layout, P, H)


def augmented_wmse(eps, u) -> np.ndarray:
    eps = np.asarray(eps, float)
    u = np.asarray(u, float)
    return u * eps - np.log(u)


def _locate(layout: StreamLayout, k: int, stream: StreamKey) -> int:
    stream = make_key(stream)
    if k not in stream:
        raise ValueError(f"user {k} does not decode stream {stream}")
    pairs, *_ = pair_table(layout)
    return pairs.index((k, stream))


def mse(k: int, stream: StreamKey, layout: StreamLayout, P, H, g: complex) -> float:
    i = _locate(layout, k, stream)
    gvec = np.zeros(len(pair_table(layout)[0]), dtype=complex)
    gvec[i] = g
    return float(mses(layout, P, H, gvec)[i])


def mmse_equalizer(k: int, stream: StreamKey, layout: StreamLayout, P, H) -> complex:
    return complex(mmse_equalizers(layout, P, H)[_locate(layout, k, stream)])


def mmse_weight(k: int, stream: StreamKey, layout: StreamLayout, P, H) -> float:
    return float(mmse_weights(layout, P, H)[_locate(layout, k, stream)])


# -- convex subproblem -------------------------------------------------------

@dataclass
class ConvexProblem:
    """A conic program plus the bookkeeping to map its solution back."""

    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    dims: dict
    A: np.ndarray
    b: np.ndarray
    layout: StreamLayout
    Nt: int
    x_vars: list = field(default_factory=list)   # (stream, user) per x entry
    t_users: list = field(default_factory=list)  # users with a private epigraph
    slack_users: list = field(default_factory=list)
    offset: float = 0.0                          # objective constant
    phase1: bool = False
    scale: float = 1.0                           # P = scale * (precoder variables)

    @property
    def n_p(self) -> int:
        return self.layout.n_streams * self.Nt

    @property
    def n(self) -> int:
        return self.c.size

    def unpack(self, z: np.ndarray):
        """Split a solution vector into (P, x, t, slack)."""
        n_p = self.n_p
        P = self.scale * (z[:n_p] + 1j * z[n_p:2 * n_p]).reshape(self.layout.n_streams, self.Nt)
        o = 2 * n_p
        x = z[o:o + len(self.x_vars)]
        o += len(self.x_vars)
        t = z[o:o + len(self.t_users)]
        o += len(self.t_users)
        s = z[o:o + len(self.slack_users)]
        return P, x, t, s

    def pack(self, P, x=None, t=None, s=None) -> np.ndarray:
        P = np.asarray(P, complex) / self.scale
        parts = [P.real.ravel(), P.imag.ravel(),
                 np.zeros(len(self.x_vars)) if x is None else np.asarray(x, float),
                 np.zeros(len(self.t_users)) if t is None else np.asarray(t, float),
                 np.zeros(len(self.slack_users)) if s is None else np.asarray(s, float)]
        return np.concatenate(parts)

    def objective(self, z: np.ndarray) -> float:
        return float(self.c @ z) + self.offset

    def slacks(self, z: np.ndarray) -> np.ndarray:
        """Cone slacks ``h - G z``; feasibility means every block lies in its cone."""
        return self.h - self.G @ z

    def cone_violation(self, z: np.ndarray) -> float:
        s = self.slacks(z)
        l = self.dims["l"]
        worst = float(np.max(-s[:l], initial=0.0))
        o = l
        for q in self.dims["q"]:
            blk = s[o:o + q]
            worst = max(worst, float(np.linalg.norm(blk[1:]) - blk[0]))
            o += q
        if self.A.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.A @ z - self.b))))
        return worst

    def to_dict(self) -> dict:
        """Standard-form dump for cross-checking with other conic solvers."""
        return {
            "format_version": 1,
            "form": "min c'z s.t. Gz + s = h, s in K, Az = b",
            "c": self.c.tolist(),
            "G": self.G.tolist(),
            "h": self.h.tolist(),
            "dims": {"l": self.dims["l"], "q": list(self.dims["q"]), "s": []},
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "objective_offset": self.offset,
            "variables": {
                "P_real": [0, self.n_p],
                "P_imag": [self.n_p, 2 * self.n_p],
                "x": [[list(a), k] for a, k in self.x_vars],
                "t": self.t_users,
                "slack": self.slack_users,
            },
            "layout": self.layout.to_dict(),
            "Nt": self.Nt,
            "precoder_scale": self.scale,
            "phase1": self.phase1,
        }


def _factor(cols: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Return F with F F^H = cols cols^H and at most Nt columns."""
    Nt, m = cols.shape
    if m <= Nt:
        keep = np.linalg.norm(cols, axis=0) > 0
        return cols[:, keep]
    lam, V = np.linalg.eigh(cols @ cols.conj().T)
    keep = lam > tol * max(lam.max(initial=0.0), 1e-300)
    return V[:, keep] * np.sqrt(lam[keep])


def pair_statistics(layout: StreamLayout, P, Hs):
    """Per-pair SAA data (F, v, d) at the MMSE point of precoder ``P``.

    ``Hs`` is one channel (K, Nt) or a stack (M, K, Nt). For pair (k, A)
    the sample-averaged augmented WMSE as a function of new precoders Q is
    ``sum_{B in rem, B != A} ||F^H q_B||^2 + ||F^H q_A - v||^2 + d``.
    Completing the square keeps the cone right-hand sides O(1) even when
    the MMSE weights are large.
    """
    Hs = _H(Hs)
    if Hs.ndim == 2:
        Hs = Hs[None]
    M = Hs.shape[0]
    _, users, _, _ = pair_table(layout)
    g = mmse_equalizers(layout, P, Hs)     # (M, npairs)
    u = mmse_weights(layout, P, Hs)        # (M, npairs)
    Hu = Hs[:, users, :]                   # (M, npairs, Nt) rows h_k
    coef = np.sqrt(u / M) * np.abs(g)      # (M, npairs)
    out = []
    for i in range(len(users)):
        cols = (coef[:, i, None] * Hu[:, i, :]).T        # Nt x M
        F = _factor(cols)
        psi = np.sum((u[:, i] / M * np.conj(g[:, i]))[:, None] * Hu[:, i, :], axis=0)
        if F.shape[1]:
            v = np.linalg.lstsq(F, psi, rcond=None)[0]
        else:
            v = np.zeros(0, dtype=complex)
        # sum(u/M) - ||v||^2 >= 0 by Cauchy-Schwarz; clip rounding
        resid = max(float(np.sum(u[:, i]) / M - np.sum(np.abs(v) ** 2)), 0.0)
        d = float(np.sum(u[:, i] / M * np.abs(g[:, i]) ** 2)) - float(np.mean(np.log(u[:, i]))) + resid
        out.append((F, v, d))
    return out


def user_offsets(layout: StreamLayout) -> np.ndarray:
    """Constant in ``xi_tot <= offset - R_th ln 2``: 1 with a private stream, else 0."""
    return np.array([1.0 if layout.has_private(k) else 0.0 for k in range(1, layout.K + 1)])


def build_subproblem(
    layout: StreamLayout,
    Hs,
    P_ref,
    weights: Sequence[float],
    thresholds: Sequence[float] | None,
    Pt: float,
    zero_streams: Sequence[StreamKey] = (),
    phase1: bool = False,
) -> ConvexProblem:
    """Assemble the WMMSE precoder subproblem at fixed MMSE (g, u) of ``P_ref``.

    Objective ``sum_k w_k xi_{k,tot}`` with ``xi_{k,tot} = sum_A X_k^A + xi_k``.
    Each multi-user stream A and each of its users k' adds
    ``sum_k X_k^A + 1 >= xi_{k'}^A``. Power, QoS and ``X <= 0`` complete it.
    With ``phase1`` the objective becomes the total QoS shortfall instead.
    """
    K = layout.K
    Hs = _H(Hs)
    Nt = Hs.shape[-1]
    ns = layout.n_streams
    n_p = ns * Nt
    w = np.asarray(weights, float)
    th = np.zeros(K) if thresholds is None else np.asarray(thresholds, float)
    pairs, _, streams, rem = pair_table(layout)
    stats = pair_statistics(layout, _P(P_ref), Hs)

    x_vars = [(a, k) for a in layout.common_keys for k in layout.split_users(a)]
    t_users = [k for k in range(1, K + 1) if layout.has_private(k)]
    slack_users = [k for k in range(1, K + 1) if phase1 and th[k - 1] > 0]
    ox = 2 * n_p
    ot = ox + len(x_vars)
    osl = ot + len(t_users)
    n = osl + len(slack_users)
    xi = {v: ox + j for j, v in enumerate(x_vars)}
    ti = {k: ot + j for j, k in enumerate(t_users)}
    si = {k: osl + j for j, k in enumerate(slack_users)}

    c = np.zeros(n)
    if phase1:
        for k in slack_users:
            c[si[k]] = 1.0
    else:
        for (a, k), j in xi.items():
            c[j] = w[k - 1]
        for k, j in ti.items():
            c[j] = w[k - 1]

    G_rows, h_rows = [], []
    # nonnegative orthant: x <= 0, QoS rows, slack >= 0
    for j in xi.values():
        row = np.zeros(n)
        row[j] = 1.0
        G_rows.append(row)
        h_rows.append(0.0)
    offs = user_offsets(layout)
    for k in range(1, K + 1):
        if th[k - 1] <= 0:
            continue
        row = np.zeros(n)
        for (a, u), j in xi.items():
            if u == k:
                row[j] = 1.0
        if k in ti:
            row[ti[k]] = 1.0
        if k in si:
            row[si[k]] = -1.0
        G_rows.append(row)
        h_rows.append(offs[k - 1] - th[k - 1] * LN2)
    for j in si.values():
        row = np.zeros(n)
        row[j] = -1.0
        G_rows.append(row)
        h_rows.append(0.0)
    n_l = len(G_rows)

    q_dims = []
    # precoders are scaled by sqrt(Pt) so the power cone is the unit ball
    scale = math.sqrt(Pt)
    blk = np.zeros((1 + 2 * n_p, n))
    blk[1:, :2 * n_p] = -np.eye(2 * n_p)
    hb = np.zeros(1 + 2 * n_p)
    hb[0] = 1.0
    G_rows.extend(blk)
    h_rows.extend(hb)
    q_dims.append(1 + 2 * n_p)

    def quad_cone(i: int, rhs: np.ndarray, rhs0: float):
        # ||a(z)||^2 <= w(z) with w = rhs.z + rhs0 - d
        F, v, d = stats[i]
        r = F.shape[1]
        Ch = scale * F.conj().T             # r x Nt
        a_idx = streams[i]
        rem_idx = np.flatnonzero(rem[i])
        w0 = rhs0 - d
        dim = 2 + 2 * r * len(rem_idx)
        blk = np.zeros((dim, n))
        hb = np.zeros(dim)
        blk[0] = -rhs
        hb[0] = w0 + 1.0
        row = 1
        for bidx in rem_idx:
            re = slice(bidx * Nt, (bidx + 1) * Nt)
            im = slice(n_p + bidx * Nt, n_p + (bidx + 1) * Nt)
            # Re(C q) = Cr qr - Ci qi ; Im(C q) = Ci qr + Cr qi
            blk[row:row + r, re] = -2.0 * Ch.real
            blk[row:row + r, im] = 2.0 * Ch.imag
            blk[row + r:row + 2 * r, re] = -2.0 * Ch.imag
            blk[row + r:row + 2 * r, im] = -2.0 * Ch.real
            if bidx == a_idx:
                hb[row:row + r] = -2.0 * v.real
                hb[row + r:row + 2 * r] = -2.0 * v.imag
            row += 2 * r
        blk[row] = -rhs
        hb[row] = w0 - 1.0
        G_rows.extend(blk)
        h_rows.extend(hb)
        q_dims.append(dim)

    for i, (k, a) in enumerate(pairs):
        rhs = np.zeros(n)
        if len(a) == 1:
            rhs[ti[k]] = 1.0
            quad_cone(i, rhs, 0.0)
        else:
            for u in layout.split_users(a):
                rhs[xi[(a, u)]] = 1.0
            quad_cone(i, rhs, 1.0)

    G = np.array(G_rows)
    h = np.array(h_rows)

    zero_streams = [make_key(a) for a in zero_streams]
    A_rows = []
    for a in zero_streams:
        j = layout.index(a)
        for part in (0, n_p):
            for e in range(Nt):
                row = np.zeros(n)
                row[part + j * Nt + e] = 1.0
                A_rows.append(row)
    A = np.array(A_rows).reshape(len(A_rows), n)
    b = np.zeros(len(A_rows))

    return ConvexProblem(c=c, G=G, h=h, dims={"l": n_l, "q": q_dims, "s": []}, A=A, b=b,
                         layout=layout, Nt=Nt, x_vars=x_vars, t_users=t_users,
                         slack_users=slack_users, phase1=phase1, scale=scale)


def subproblem_value_at(problem: ConvexProblem, layout: StreamLayout, P, Hs,
                        split_nats: Mapping[tuple[StreamKey, int], float]) -> np.ndarray:
    """Feasible point ``(P, x = -split, t = xi_private)`` of a built subproblem."""
    pairs, *_ = pair_table(layout)
    stats = pair_statistics(layout, _P(P), Hs)
    x = np.array([-split_nats.get(v, 0.0) for v in problem.x_vars])
    t = []
    Pm = _P(P)
    for k in problem.t_users:
        i = pairs.index((k, (k,)))
        t.append(quadratic_value(stats[i], layout, i, Pm))
    return problem.pack(Pm, x, np.array(t))


def quadratic_value(stat, layout: StreamLayout, i: int, P: np.ndarray) -> float:
    """Evaluate one pair's averaged augmented WMSE at precoders ``P``."""
    F, v, d = stat
    _, _, streams, rem = pair_table(layout)
    val = d
    for b in np.flatnonzero(rem[i]):
        a = F.conj().T @ P[b]
        if b == streams[i]:
            a = a - v
        val += float(np.sum(np.abs(a) ** 2))
    return val
