"""Flat-fading uplink channels: i.i.d. Rayleigh and path-loss/shadowing/Kronecker."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ChannelRealization:
    C: np.ndarray                 # (N_R, K) complex
    gains: np.ndarray             # (K,) large-scale amplitude alpha_k * beta_k
    noise_var: float = 1.0


@dataclass
class CorrelationModel:
    rho: float
    R: np.ndarray
    sqrt: np.ndarray
    clamped: float = 0.0          # magnitude of negative eigenvalues set to 0


@dataclass
class LargeScaleParams:
    path_loss: np.ndarray         # L_p^(k), base power path loss
    shadow_db: np.ndarray         # sigma_k in dB
    alpha: np.ndarray
    beta: np.ndarray
    exponent: float | None = None  # path-loss exponent; metadata only

    @property
    def gains(self) -> np.ndarray:
        return self.alpha * self.beta


@dataclass
class ScenarioParams:
    """Parameters of the correlated scenario (scenario 2)."""
    path_loss: tuple | None = None          # fixed L_p per user; drawn U[lo, hi] if None
    path_loss_range: tuple = (0.7, 1.0)
    shadow_db: float = 3.0
    rx_correlation: float = 0.8
    path_loss_exponent: float = 2.0
    extra: dict = field(default_factory=dict)


def complex_normal(shape, rng: np.random.Generator, var: float = 1.0) -> np.ndarray:
    s = np.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def iid_rayleigh(K: int, NR: int, rng: np.random.Generator) -> np.ndarray:
    return complex_normal((NR, K), rng)


def large_scale(K: int, rng: np.random.Generator, path_loss=None, shadow_db=3.0,
                path_loss_range=(0.7, 1.0), exponent=None) -> LargeScaleParams:
    if path_loss is None:
        lp = rng.uniform(path_loss_range[0], path_loss_range[1], K)
    else:
        lp = np.broadcast_to(np.asarray(path_loss, dtype=np.float64), (K,)).copy()
    if np.any(lp < 0):
        raise ValueError("path loss must be nonnegative")
    sig = np.broadcast_to(np.asarray(shadow_db, dtype=np.float64), (K,)).copy()
    z = rng.standard_normal(K)
    beta = 10.0 ** (sig * z / 10.0)
    return LargeScaleParams(lp, sig, np.sqrt(lp), beta, exponent)


def build_rx_correlation(rho: float, NR: int) -> CorrelationModel:
    """Receive correlation with entries rho**((i-j)**2) and its PSD square root."""
    idx = np.arange(NR)
    R = float(rho) ** ((idx[:, None] - idx[None, :]) ** 2).astype(np.float64)
    w, V = np.linalg.eigh(R)
    clamped = float(-w[w < 0].sum()) if np.any(w < 0) else 0.0
    if clamped > 1e-8:
        warnings.warn(f"receive correlation not PSD; clamped {clamped:.3g}", stacklevel=2)
    S = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
    S = 0.5 * (S + S.T)
    return CorrelationModel(float(rho), R, S, clamped)


def realize_channel(scenario: int, K: int, NR: int, rng: np.random.Generator,
                    params: ScenarioParams | None = None, noise_var: float = 1.0,
                    corr: CorrelationModel | None = None) -> ChannelRealization:
    """Draw one block-fading channel.

    Scenario 1: i.i.d. unit-variance Rayleigh. Scenario 2:
    c_k = alpha_k beta_k R^{1/2} h_k with path loss, log-normal shadowing
    and receive correlation.
    """
    if scenario == 1:
        return ChannelRealization(iid_rayleigh(K, NR, rng), np.ones(K), noise_var)
    if scenario != 2:
        raise ValueError(f"unknown scenario {scenario}")
    p = params or ScenarioParams()
    if corr is None:
        corr = build_rx_correlation(p.rx_correlation, NR)
    ls = large_scale(K, rng, p.path_loss, p.shadow_db, p.path_loss_range, p.path_loss_exponent)
    H0 = iid_rayleigh(K, NR, rng)
    C = (corr.sqrt @ H0) * ls.gains
    return ChannelRealization(C, ls.gains, noise_var)


def apply(C, x, noise_var: float, rng: np.random.Generator) -> np.ndarray:
    """r = C x + n for symbols ``x`` of shape (..., K); returns (..., N_R)."""
    C = np.asarray(C)
    x = np.asarray(x)
    clean = x @ C.T
    if noise_var == 0:
        return clean
    return clean + complex_normal(clean.shape, rng, noise_var)
