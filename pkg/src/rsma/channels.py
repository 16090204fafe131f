"""Deterministic and random channel constructions and CSIT error sampling.

All randomness uses numpy's Philox counter-based generator. Each draw gets
its own stream through a ``SeedSequence`` spawn key, so the value of a sample
does not depend on how many other samples were drawn before it:

* random channels: key ``(0, realization, user)``
* CSIT errors:     key ``(1, user, sample)``

Complex Gaussian entries CN(0, s2) have real and imaginary parts drawn
independently from N(0, s2 / 2).
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import ChannelSet, CsitModel

_CHANNEL_STREAM = 0
_ERROR_STREAM = 1


def _rng(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def crandn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian samples with total variance ``var``."""
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return np.sqrt(var / 2.0) * (z[0] + 1j * z[1])


def steering(Nt: int, theta: float) -> np.ndarray:
    return np.exp(1j * theta * np.arange(Nt))


def structured_channels(Nt: int, gammas: Sequence[float], thetas: Sequence[float]) -> ChannelSet:
    """User 1 sees the all-ones channel; user ``k+1`` sees a scaled, rotated copy.

    The rows are the Hermitian-transposed column vectors, so
    ``h_{k+1} = gamma_k * conj([1, e^{j theta_k}, ...])``. Only inner-product
    magnitudes matter for every rate, so the conjugation is a convention.
    """
    gammas = list(np.atleast_1d(gammas).astype(float))
    thetas = list(np.atleast_1d(thetas).astype(float))
    if int(Nt) < 1:
        raise ValueError("Nt must be >= 1")
    if len(gammas) != len(thetas):
        raise ValueError(f"need one theta per gamma, got {len(gammas)} gammas and {len(thetas)} thetas")
    rows = [np.ones(Nt, dtype=complex)]
    for g, t in zip(gammas, thetas):
        rows.append(g * np.conj(steering(Nt, t)))
    return ChannelSet(np.array(rows))


def random_channels(Nt: int, variances: Sequence[float], seed: int = 0, realization: int = 0) -> ChannelSet:
    """i.i.d. CN(0, variances[k]) entries for every antenna of user k."""
    variances = np.atleast_1d(np.asarray(variances, float))
    if np.any(variances <= 0):
        raise ValueError("channel variances must be positive")
    rows = [crandn(_rng(seed, _CHANNEL_STREAM, realization, k), Nt, v) for k, v in enumerate(variances)]
    return ChannelSet(np.array(rows))


def channel_ensemble(Nt: int, variances: Sequence[float], n: int, seed: int = 0) -> list[ChannelSet]:
    return [random_channels(Nt, variances, seed, r) for r in range(n)]


def error_array(model: CsitModel, start: int = 0) -> np.ndarray:
    """Error samples ``start .. start + M - 1`` as an (M, K, Nt) array.

    Sample m of user k always comes from the same RNG stream, so disjoint
    index ranges give independent ensembles (e.g. optimize vs evaluate).
    """
    K, Nt = model.estimate.K, model.estimate.Nt
    E = np.zeros((model.M, K, Nt), dtype=complex)
    for k, s in enumerate(model.sigma_e):
        if s == 0.0:
            continue
        for m in range(model.M):
            E[m, k] = crandn(_rng(model.seed, _ERROR_STREAM, k, start + m), Nt, s * s)
    return E


def sample_array(model: CsitModel, start: int = 0) -> np.ndarray:
    """Channel realizations ``H_hat + H_err`` as an (M, K, Nt) array."""
    return model.estimate.H[None, :, :] + error_array(model, start)


def sample_csit_errors(model: CsitModel, start: int = 0) -> list[ChannelSet]:
    return [ChannelSet(Hm) for Hm in sample_array(model, start)]


def ascending_gain_order(H: ChannelSet) -> list[int]:
    """Users sorted by channel gain, weakest first (ties to the lower index)."""
    g = H.gains()
    return [int(i) + 1 for i in sorted(range(H.K), key=lambda i: (g[i], i))]
