"""Named scenario bundles matching the evaluated deployments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import channel_ensemble, structured_channels
from .model import ChannelSet, ScenarioConfig

SNR_GRID = (0, 5, 10, 15, 20, 25, 30)

THRESHOLD_SCHEDULES = {
    "three-user-overloaded": (0.02, 0.08, 0.19, 0.3, 0.4, 0.4, 0.4),
    "four-user": (0.03, 0.1, 0.2, 0.3, 0.4, 0.4, 0.4),
    "siso": (0.0, 0.0, 0.01, 0.03, 0.1, 0.2, 0.3),
    "ten-user": (0.01, 0.03, 0.05, 0.1, 0.1, 0.1, 0.1),
    "ten-user-low": (0.0, 0.001, 0.004, 0.01, 0.03, 0.06, 0.1),
    "zero": (0.0,) * 7,
}

THETAS = tuple(k * math.pi / 9 for k in (1, 2, 3, 4))
THREE_USER_WEIGHTS = ((0.2, 0.3, 0.5), (0.4, 0.3, 0.3), (0.6, 0.3, 0.1))
THREE_USER_GAMMAS = ((1.0, 1.0), (1.0, 0.3), (0.3, 0.1))


def weight_grid() -> list[float]:
    """u_2 values for two-user regions (u_1 = 1): 1e-3, 10^[-1:0.05:1], 1e3."""
    mid = [10.0 ** (e / 20.0) for e in range(-20, 21)]
    return [1e-3] + mid + [1e3]


def schedule_for(name: str, snrs=SNR_GRID) -> list[float]:
    table = dict(zip(SNR_GRID, THRESHOLD_SCHEDULES[name]))
    try:
        return [table[int(s)] for s in snrs]
    except KeyError as exc:
        raise ValueError(f"threshold schedule {name!r} has no entry for SNR {exc.args[0]} dB") from None


@dataclass
class Preset:
    name: str
    description: str
    kind: str                                   # "region" or "curve"
    variants: list                              # (label, ScenarioConfig)
    strategies: tuple[str, ...]
    snrs: tuple = ()
    schedule: str | None = None
    notes: list = field(default_factory=list)


def build_channels(cfg: ScenarioConfig) -> list[ChannelSet]:
    """Channel realizations described by ``cfg.channel``."""
    ch = dict(cfg.channel)
    kind = ch.get("kind", "structured")
    if kind == "structured":
        H = structured_channels(cfg.Nt, ch["gammas"], ch["thetas"])
        if H.K != cfg.K:
            raise ValueError(f"structured channel has {H.K} users but K={cfg.K}")
        return [H]
    if kind == "random":
        var = ch["variances"]
        if len(var) != cfg.K:
            raise ValueError(f"need {cfg.K} channel variances")
        return channel_ensemble(cfg.Nt, var, int(ch.get("realizations", 1)), int(ch.get("seed", cfg.seed)))
    if kind == "explicit":
        H = ChannelSet.from_dict(ch)
        if H.K != cfg.K or H.Nt != cfg.Nt:
            raise ValueError("explicit channel does not match K/Nt")
        return [H]
    raise ValueError(f"unknown channel kind {kind!r}")


def _two_user(gamma, theta, Nt, snr, **kw) -> ScenarioConfig:
    return ScenarioConfig(strategy="rs", Nt=Nt, K=2, snr_db=snr, weights=(1.0, 1.0), thresholds=(0.0, 0.0),
                          channel={"kind": "structured", "gammas": [gamma], "thetas": [theta]}, **kw)


def _three_user(gammas, theta1, Nt, weights, snr=20.0) -> ScenarioConfig:
    return ScenarioConfig(strategy="rs", Nt=Nt, K=3, snr_db=snr, weights=weights, thresholds=(0.0,) * 3,
                          channel={"kind": "structured", "gammas": list(gammas),
                                   "thetas": [theta1, 2 * theta1]})


def _four_user(gamma1, theta1, inter, snr=20.0) -> ScenarioConfig:
    th2 = theta1 + inter
    return ScenarioConfig(strategy="hrs", Nt=2, K=4, snr_db=snr, weights=(0.25,) * 4, thresholds=(0.0,) * 4,
                          channel={"kind": "structured", "gammas": [gamma1, 1.0, gamma1],
                                   "thetas": [theta1, th2, theta1 + th2]},
                          grouping=((1, 2), (3, 4)))


def _tlabel(t: float) -> str:
    return f"{round(t / math.pi * 18)}pi/18"


def _presets() -> dict[str, Preset]:
    p = {}
    two = []
    for g in (1.0, 0.3):
        for t in THETAS:
            for Nt in (2, 4):
                for snr in (10.0, 20.0):
                    two.append((f"gamma={g} theta={_tlabel(t)} Nt={Nt} snr={snr:g}", _two_user(g, t, Nt, snr)))
    p["two-user"] = Preset("two-user", "Two-user rate regions on structured channels (gamma, theta, Nt, SNR grid)",
                           "region", two, ("mulp", "sc-sic", "rs"))
    p["fig5"] = Preset("fig5", "Two-user regions, gamma=1, Nt=4, SNR 20 dB, four channel angles", "region",
                       [(f"theta={_tlabel(t)}", _two_user(1.0, t, 4, 20.0)) for t in THETAS],
                       ("mulp", "sc-sic", "rs"))
    p["two-user-random"] = Preset(
        "two-user-random", "Two-user average regions over 100 i.i.d. Rayleigh channels", "region",
        [(f"var=({v1},{v2}) Nt={Nt} snr={snr:g}",
          ScenarioConfig(strategy="rs", Nt=Nt, K=2, snr_db=snr, weights=(1.0, 1.0), thresholds=(0.0, 0.0),
                         channel={"kind": "random", "variances": [v1, v2], "realizations": 100, "seed": 0}))
         for (v1, v2, Nt) in ((1.0, 1.0, 4), (1.0, 0.09, 2)) for snr in (10.0, 20.0)],
        ("mulp", "sc-sic", "rs"))
    p["two-user-imperfect"] = Preset(
        "two-user-imperfect", "Two-user average-rate regions with imperfect CSIT, Nt=4, SNR 20 dB", "region",
        [(f"gamma={g} theta={_tlabel(t)}",
          _two_user(g, t, 4, 20.0, csit={"scales": [1.0, g], "exponent": 0.6, "M_opt": 100,
                                         "M_eval": 1000, "seed": 0}))
         for g in (1.0, 0.3) for t in THETAS],
        ("mulp", "sc-sic", "rs"))
    p["fig9-threeuser"] = Preset(
        "fig9-threeuser", "Three-user WSR vs SNR, u=(0.2,0.3,0.5), gamma=(1,0.3), Nt=4, no QoS", "curve",
        [(f"theta1={_tlabel(t)}", _three_user((1.0, 0.3), t, 4, (0.2, 0.3, 0.5))) for t in THETAS],
        ("mulp", "sc-sic", "rs1", "rs"), SNR_GRID, "zero")
    p["three-user-underloaded"] = Preset(
        "three-user-underloaded", "Three-user WSR vs SNR, Nt=4, no QoS, all weight/gamma combinations", "curve",
        [(f"u={w} gamma={g} theta1={_tlabel(t)}", _three_user(g, t, 4, w))
         for g in THREE_USER_GAMMAS for w in THREE_USER_WEIGHTS for t in THETAS],
        ("mulp", "sc-sic", "rs1", "rs"), SNR_GRID, "zero")
    over = []
    for g in THREE_USER_GAMMAS:
        for w in THREE_USER_WEIGHTS:
            for t in THETAS:
                c = _three_user(g, t, 2, w).replace(grouping=[[1], [2, 3]])
                over.append((f"u={w} gamma={g} theta1={_tlabel(t)}", c))
    p["three-user-overloaded"] = Preset(
        "three-user-overloaded", "Three-user WSR vs SNR, Nt=2, QoS schedule, grouping {1},{2,3} for per-group SC-SIC",
        "curve", over, ("mulp", "sc-sic", "sc-sic-group", "rs1", "rs"), SNR_GRID, "three-user-overloaded")
    p["siso-three-user"] = Preset(
        "siso-three-user", "Three-user SISO WSR vs SNR averaged over 10 channels, variances (1, 0.3, 0.1)", "curve",
        [("var=(1,0.3,0.1)", ScenarioConfig(strategy="rs1", Nt=1, K=3, snr_db=20.0, weights=(1.0, 1.0, 1.0),
                                           thresholds=(0.0,) * 3,
                                           channel={"kind": "random", "variances": [1.0, 0.3, 0.1],
                                                    "realizations": 10, "seed": 0}))],
        ("mulp", "sc-sic", "rs1", "rs"), SNR_GRID, "siso")
    four = []
    for g1 in (0.3, 1.0):
        for inter in (math.pi / 9, math.pi / 3):
            for t in (0.0, math.pi / 18, math.pi / 9, math.pi / 6):
                four.append((f"gamma1={g1} inter={_tlabel(inter)} theta1={_tlabel(t)}", _four_user(g1, t, inter)))
    p["four-user-hrs"] = Preset(
        "four-user-hrs", "Four-user overloaded (Nt=2) WSR vs SNR, groups {1,2},{3,4}, u=0.25", "curve", four,
        ("mulp", "sc-sic-group", "rs1-group", "rs1", "hrs"), SNR_GRID, "four-user")
    ten = []
    for name, var in (("equal", [1.0] * 10), ("descending", [round(1.0 - 0.1 * k, 1) for k in range(10)])):
        ten.append((f"var={name}", ScenarioConfig(strategy="rs1", Nt=2, K=10, snr_db=30.0, weights=(1.0,) * 10,
                                                  thresholds=(0.0,) * 10, order="ascending-gain",
                                                  channel={"kind": "random", "variances": var,
                                                           "realizations": 10, "seed": 0})))
    p["ten-user"] = Preset("ten-user", "Ten-user overloaded (Nt=2) WSR vs SNR, unit weights, QoS schedule up to 0.1",
                           "curve", ten, ("mulp", "sc-sic", "rs1", "multicast"), SNR_GRID, "ten-user",
                           notes=["SC-SIC uses only the ascending channel gain decoding order"])
    p["ten-user-low"] = Preset("ten-user-low", "Ten-user overloaded WSR vs SNR with the low QoS schedule", "curve",
                               ten, ("mulp", "sc-sic", "rs1", "multicast"), SNR_GRID, "ten-user-low",
                               notes=["SC-SIC uses only the ascending channel gain decoding order"])
    return p


PRESETS = _presets()


def preset_names() -> list[str]:
    return sorted(PRESETS)


class UnknownPreset(ValueError):
    pass


def preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; available presets: {', '.join(preset_names())}") from None


def three_user_config(gammas, theta1, Nt, weights, snr=20.0) -> ScenarioConfig:
    return _three_user(gammas, theta1, Nt, weights, snr)


def two_user_config(gamma, theta, Nt, snr, **kw) -> ScenarioConfig:
    return _two_user(gamma, theta, Nt, snr, **kw)


def four_user_config(gamma1, theta1, inter, snr=20.0) -> ScenarioConfig:
    return _four_user(gamma1, theta1, inter, snr)
