"""Soft-input soft-output MMSE-PIC detection with anti-Gray QPSK.

All LLRs follow the decoder convention L = log P(b=0) / P(b=1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

_S = 1.0 / np.sqrt(2.0)
NU2_FLOOR = 1e-12
LLR_CLIP = 50.0


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray   # (C,) complex, unit average energy
    labels: np.ndarray   # (C, J) bits; row c is the label of points[c]

    def __post_init__(self):
        C, J = self.labels.shape
        if C != 2 ** J or self.points.shape != (C,):
            raise ValueError("labels must enumerate all 2**J bit patterns")
        keys = {tuple(r) for r in self.labels.tolist()}
        if len(keys) != C:
            raise ValueError("labels must be a bijection")

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    @property
    def energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


# 00 -> (+1+j), 01 -> (-1-j), 10 -> (+1-j), 11 -> (-1+j); going round the
# circle the labels 00,11,01,10 differ by 2,1,2,1 bits.
QPSK_ANTIGRAY = Constellation(
    points=np.array([1 + 1j, -1 - 1j, 1 - 1j, -1 + 1j]) * _S,
    labels=np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8),
)


def modulate(bits, const: Constellation = QPSK_ANTIGRAY) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    J = const.bits_per_symbol
    if bits.shape[-1] % J:
        raise ValueError(f"bit count must be a multiple of {J}")
    groups = bits.reshape(bits.shape[:-1] + (-1, J))
    weights = 1 << np.arange(J - 1, -1, -1)
    label_index = groups @ weights
    # labels are stored in natural binary order, so label value == row index
    lookup = np.empty(2 ** J, dtype=np.int64)
    lookup[const.labels.astype(np.int64) @ weights] = np.arange(2 ** J)
    return const.points[lookup[label_index]]


def _bit_log_probs(llr):
    """log P(b=0), log P(b=1) for LLRs (any shape)."""
    llr = np.asarray(llr, dtype=np.float64)
    return -np.logaddexp(0.0, -llr), -np.logaddexp(0.0, llr)


def _symbol_log_prior(prior_llrs, const: Constellation, exclude: int | None = None):
    """log Pr(a) for every point, shape (..., C); optionally drop one bit's prior."""
    lp0, lp1 = _bit_log_probs(prior_llrs)          # (..., J)
    lab = const.labels.astype(bool)                # (C, J)
    terms = np.where(lab, lp1[..., None, :], lp0[..., None, :])   # (..., C, J)
    if exclude is not None:
        terms = np.delete(terms, exclude, axis=-1)
    return terms.sum(axis=-1)


def soft_symbol(prior_llrs, const: Constellation = QPSK_ANTIGRAY):
    """Mean and variance of a symbol under independent bit priors.

    ``prior_llrs`` has shape (..., J); returns ``(mean, var)`` of shape (...).
    """
    logp = _symbol_log_prior(prior_llrs, const)
    p = np.exp(logp)
    mean = p @ const.points
    second = p @ (np.abs(const.points) ** 2)
    var = np.maximum(second - np.abs(mean) ** 2, 0.0)
    return mean, var


def pic_cancel(r, C, x_hat, k: int):
    """Received vector(s) with the soft estimates of all users but ``k`` removed.

    ``r`` is (..., N_R) and ``x_hat`` (..., K).
    """
    x = np.array(x_hat, dtype=np.complex128)
    x[..., k] = 0.0
    return np.asarray(r) - x @ np.asarray(C).T


def mmse_filter(C, v, k: int, noise_var: float, sx2: float = 1.0):
    """Soft-PIC MMSE filter for user ``k``.

    Returns ``(w, mu, nu2)`` with w = sx2 S^-1 c_k,
    S = sum_{q!=k} v_q c_q c_q^H + sx2 c_k c_k^H + noise_var I,
    mu = w^H c_k and nu2 = sx2 (mu - mu^2).
    """
    C = np.asarray(C, dtype=np.complex128)
    v = np.asarray(v, dtype=np.float64).copy()
    v[k] = sx2
    S = (C * v) @ C.conj().T + noise_var * np.eye(C.shape[0])
    ck = C[:, k]
    try:
        w = sx2 * np.linalg.solve(S, ck)
    except np.linalg.LinAlgError:
        w = sx2 * np.linalg.solve(S + 1e-12 * np.eye(C.shape[0]), ck)
    mu = float(np.real(np.vdot(w, ck)))
    return w, mu, sx2 * (mu - mu * mu)


def demap_llr(y, mu, nu2, prior_llrs, const: Constellation = QPSK_ANTIGRAY):
    """Exact extrinsic bit LLRs of ``y ~ mu a + CN(0, nu2)``.

    Broadcasts over leading dimensions of ``y``/``mu``/``nu2`` and
    ``prior_llrs[..., J]``. Each bit's own prior is excluded, so the
    posterior is the returned value plus ``prior_llrs``.
    """
    y = np.asarray(y, dtype=np.complex128)
    mu = np.asarray(mu, dtype=np.float64)
    nu2 = np.asarray(nu2, dtype=np.float64)
    prior_llrs = np.asarray(prior_llrs, dtype=np.float64)
    J = const.bits_per_symbol
    metric = -np.abs(y[..., None] - mu[..., None] * const.points) ** 2 / nu2[..., None]   # (..., C)
    out = np.empty(np.broadcast_shapes(y.shape, prior_llrs.shape[:-1]) + (J,))
    lab = const.labels.astype(bool)
    for j in range(J):
        lp = _symbol_log_prior(prior_llrs, const, exclude=j)
        tot = metric + lp
        out[..., j] = (logsumexp(np.where(lab[:, j], -np.inf, tot), axis=-1)
                       - logsumexp(np.where(lab[:, j], tot, -np.inf), axis=-1))
    return out


@dataclass
class DetectorOutput:
    y: np.ndarray          # (T, K) filter outputs
    mu: np.ndarray         # (T, K) effective gains
    nu2: np.ndarray        # (T, K) effective noise variances
    extrinsic: np.ndarray  # (T, K, J)
    posterior: np.ndarray  # (T, K, J)


def detect(r, C, noise_var: float, prior_llrs=None, const: Constellation = QPSK_ANTIGRAY,
           sx2: float = 1.0) -> DetectorOutput:
    """MMSE-PIC detection of a block of received vectors.

    ``r`` has shape (T, N_R); ``prior_llrs`` shape (T, K, J) (zeros if None).
    """
    r = np.asarray(r, dtype=np.complex128)
    C = np.asarray(C, dtype=np.complex128)
    T, NR = r.shape
    K = C.shape[1]
    J = const.bits_per_symbol
    if C.shape[0] != NR:
        raise ValueError("channel rows must match receive dimension")
    if prior_llrs is None:
        prior_llrs = np.zeros((T, K, J))
    prior_llrs = np.asarray(prior_llrs, dtype=np.float64)
    if prior_llrs.shape != (T, K, J):
        raise ValueError(f"prior shape {prior_llrs.shape} != {(T, K, J)}")
    x_hat, v = soft_symbol(prior_llrs, const)                     # (T, K)
    # residual after cancelling every user, then add back user k
    resid = r - x_hat @ C.T                                       # (T, NR)
    r_hat = resid[:, None, :] + x_hat[:, :, None] * C.T[None]     # (T, K, NR)
    # covariance per (t, k): C diag(v_t) C^H + (sx2 - v_tk) c_k c_k^H + noise I
    base = np.einsum("ik,tk,jk->tij", C, v, C.conj()) + noise_var * np.eye(NR)
    outer = np.einsum("ik,jk->kij", C, C.conj())                  # (K, NR, NR)
    S = base[:, None] + (sx2 - v)[:, :, None, None] * outer[None]
    rhs = np.broadcast_to(C.T[None], (T, K, NR))[..., None]
    try:
        w = sx2 * np.linalg.solve(S, rhs)[..., 0]
    except np.linalg.LinAlgError:
        w = sx2 * np.linalg.solve(S + 1e-12 * np.eye(NR), rhs)[..., 0]
    mu = np.real(np.einsum("tki,ik->tk", w.conj(), C))
    nu2 = np.maximum(sx2 * (mu - mu * mu), NU2_FLOOR)
    y = np.einsum("tki,tki->tk", w.conj(), r_hat)
    ext = np.clip(demap_llr(y, mu, nu2, prior_llrs, const), -LLR_CLIP, LLR_CLIP)
    return DetectorOutput(y, mu, nu2, ext, ext + prior_llrs)
