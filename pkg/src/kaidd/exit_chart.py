"""EXIT transfer curves of the decoder and the MMSE-PIC detector.

A-priori LLRs follow the consistent Gaussian model
L = (sigma_A^2 / 2) s + sigma_A n with s = +1 for bit 0 and n ~ N(0, 1);
sigma_A = J^-1(I_A). Extrinsic information is measured by the time average
I_E = 1 - E[log2(1 + exp(-s L_E))].
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .channel import ScenarioParams, apply, build_rx_correlation, realize_channel
from .decoder import ReweightedDecoder
from .detector import QPSK_ANTIGRAY, detect, modulate
from .idd import ebn0_to_snr, snr_to_noise_variance
from .ldpc_code import GeneratorMatrix, ParityCheckMatrix, encode

SIGMA_MAX = 60.0
I_A_TOP = 0.999
MIN_BITS = 100_000


# ---------------------------------------------------------------- J function


def _j_quad(sigma: float) -> float:
    if sigma <= 0.0:
        return 0.0
    mean = sigma * sigma / 2.0

    def integrand(x):
        return math.exp(-((x - mean) ** 2) / (2 * sigma * sigma)) * np.logaddexp(0.0, -x) / math.log(2.0)

    lo, hi = mean - 12 * sigma, mean + 12 * sigma
    val, _ = quad(integrand, lo, hi, limit=200, points=[0.0, mean] if lo < 0 < hi else [mean])
    return 1.0 - val / (math.sqrt(2 * math.pi) * sigma)


@lru_cache(maxsize=1)
def _tables():
    sig = np.concatenate([np.linspace(0.0, 10.0, 401)[:-1], np.linspace(10.0, SIGMA_MAX, 101)])
    J = np.array([_j_quad(s) for s in sig])
    J = np.maximum.accumulate(J)
    # keep a strictly increasing table for the inverse
    keep = np.concatenate([[True], np.diff(J) > 1e-15])
    return PchipInterpolator(sig, J), PchipInterpolator(J[keep], sig[keep]), float(J[keep][-1])


def j_function(sigma):
    """Mutual information between a bit and its consistent-Gaussian LLR of std ``sigma``."""
    fwd, _, _ = _tables()
    s = np.clip(np.asarray(sigma, dtype=np.float64), 0.0, SIGMA_MAX)
    out = fwd(s)
    return float(out) if out.ndim == 0 else out


def j_inverse(info):
    i = np.asarray(info, dtype=np.float64)
    if np.any((i < 0) | (i >= 1)):
        raise ValueError("mutual information must lie in [0, 1)")
    _, inv, top = _tables()
    out = np.where(i <= 0, 0.0, inv(np.minimum(i, top)))
    return float(out) if out.ndim == 0 else out


def gaussian_apriori(signs, sigma_a: float, rng: np.random.Generator | None = None,
                     noise=None) -> np.ndarray:
    """Consistent-Gaussian a-priori LLRs; ``noise`` (unit normal) may be supplied."""
    signs = np.asarray(signs, dtype=np.float64)
    if noise is None:
        noise = rng.standard_normal(signs.shape)
    return 0.5 * sigma_a * sigma_a * signs + sigma_a * np.asarray(noise)


def measure_mi(signs, llr) -> float:
    """Time-average estimate of I(bit; LLR) in bits."""
    s = np.asarray(signs, dtype=np.float64).ravel()
    L = np.asarray(llr, dtype=np.float64).ravel()
    return float(np.clip(1.0 - np.mean(np.logaddexp(0.0, -s * L)) / math.log(2.0), 0.0, 1.0))


def default_grid(n: int = 11) -> np.ndarray:
    """Evenly spaced I_A in [0, 1] with the top point pulled to 0.999."""
    g = np.linspace(0.0, 1.0, n)
    g[-1] = min(g[-1], I_A_TOP)
    return g


def _check_grid(grid):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("I_A grid must be strictly increasing")
    if grid[0] < 0 or grid[-1] >= 1:
        raise ValueError("I_A values must lie in [0, 1)")
    return grid


@dataclass
class ExitCurve:
    component: str
    label: str
    ebn0_db: float | None
    i_a: np.ndarray
    i_e: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("i_a", "i_e"))
        for a, e in zip(self.i_a, self.i_e):
            w.writerow((f"{a:.10g}", f"{e:.10g}"))
        return buf.getvalue()

    def is_monotone(self, tol: float = 0.01) -> bool:
        return bool(np.all(np.diff(self.i_e) >= -tol))


# ---------------------------------------------------------------- curves


def exit_decoder_curve(H: ParityCheckMatrix, rho=1.0, inner_iters: int = 30, grid=None,
                       min_bits: int = MIN_BITS, seed=0, label: str = "decoder") -> ExitCurve:
    """Decoder transfer curve: a-priori LLRs in, extrinsic b - lambda out.

    Frame f draws its codeword and unit noise from SeedSequence([seed, f])
    and reuses them at every grid point, so curves for different weight
    vectors (and neighbouring grid points) share their randomness.
    """
    grid = _check_grid(default_grid() if grid is None else grid)
    sigmas = [j_inverse(ia) for ia in grid]
    gen = GeneratorMatrix.from_parity_check(H)
    dec = ReweightedDecoder(H, rho)
    n_frames = max(1, math.ceil(min_bits / H.N))
    acc = np.zeros(grid.size)
    for f in range(n_frames):
        rng = np.random.default_rng(np.random.SeedSequence([seed, f]))
        cw = encode(gen, rng.integers(0, 2, gen.K, dtype=np.uint8))
        s = 1.0 - 2.0 * cw
        z = rng.standard_normal(H.N)
        for g, sigma in enumerate(sigmas):
            la = gaussian_apriori(s, sigma, noise=z)
            _, _, _, _, b = dec.run(la, inner_iters)
            acc[g] += measure_mi(s, b - la)
    return ExitCurve("decoder", label, None, grid, acc / n_frames)


def exit_detector_curve(K: int, NR: int, ebn0_db: float, rate: float = 0.5, scenario: int = 1,
                        block_symbols: int = 500, grid=None, min_bits: int = MIN_BITS, seed=0,
                        params: ScenarioParams | None = None) -> ExitCurve:
    """MMSE-PIC transfer curve at ``ebn0_db`` (SNR from rate and QPSK).

    Block b (bits, channel, noise) comes from SeedSequence([seed, b]) and is
    reused at every grid point.
    """
    grid = _check_grid(default_grid() if grid is None else grid)
    sigmas = [j_inverse(ia) for ia in grid]
    J = QPSK_ANTIGRAY.bits_per_symbol
    nv = snr_to_noise_variance(ebn0_to_snr(ebn0_db, rate, J), K)
    corr = build_rx_correlation((params or ScenarioParams()).rx_correlation, NR) if scenario == 2 else None
    n_blocks = max(1, math.ceil(min_bits / (K * block_symbols * J)))
    acc = np.zeros(grid.size)
    for blk in range(n_blocks):
        rng = np.random.default_rng(np.random.SeedSequence([seed, blk]))
        bits = rng.integers(0, 2, size=(K, block_symbols * J), dtype=np.uint8)
        x = modulate(bits).T
        chan = realize_channel(scenario, K, NR, rng, params, nv, corr)
        r = apply(chan.C, x, nv, rng)
        s = (1.0 - 2.0 * bits).reshape(K, block_symbols, J).transpose(1, 0, 2)
        z = rng.standard_normal(s.shape)
        for g, sigma in enumerate(sigmas):
            det = detect(r, chan.C, nv, gaussian_apriori(s, sigma, noise=z))
            acc[g] += measure_mi(s, det.extrinsic)
    return ExitCurve("detector", "mmse-pic", ebn0_db, grid, acc / n_blocks)
