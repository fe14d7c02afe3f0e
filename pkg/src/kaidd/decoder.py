"""Reweighted belief-propagation decoding (flooding schedule, tanh rule).

LLR convention: L = log P(bit=0) / P(bit=1); positive means bit 0.

Every check ``i`` carries a weight rho_i in (0, 1]; rho = 1 everywhere is
plain sum-product. Variable-to-check, check-to-variable and belief updates:

    Psi_ji   = lam_j + sum_{i' in N(j)\\i} rho_i' Lam_i'j - (1 - rho_i) Lam_ij
    Lam_ij   = 2 atanh( prod_{j' in N(i)\\j} tanh(Psi_j'i / 2) )
    b_j      = lam_j + sum_{i in N(j)} rho_i Lam_ij
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import jit
from .ldpc_code import ParityCheckMatrix

TANH_CLIP = 19.0
MSG_CLIP = 50.0


def validate_rho(rho, M: int) -> np.ndarray:
    """Return ``rho`` as a float array of length M, checking 0 < rho_i <= 1."""
    if np.isscalar(rho):
        rho = np.full(M, float(rho))
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (M,):
        raise ValueError(f"rho must have length {M}, got shape {rho.shape}")
    if not np.all((rho > 0) & (rho <= 1)):
        raise ValueError("reweighting factors must lie in (0, 1]")
    return rho


# ------------------------------------------------------- single-message ops


def variable_to_check(llr_in: float, lam_in, rho_in, target: int) -> float:
    """Message from a variable to its ``target``-th neighbouring check.

    ``lam_in[k]`` / ``rho_in[k]`` are the incoming check messages and the
    weights of the variable's k-th check.
    """
    lam_in = np.asarray(lam_in, dtype=np.float64)
    rho_in = np.asarray(rho_in, dtype=np.float64)
    s = float(llr_in)
    for k in range(lam_in.size):
        if k != target:
            s += rho_in[k] * lam_in[k]
    s -= (1.0 - rho_in[target]) * lam_in[target]
    return float(np.clip(s, -MSG_CLIP, MSG_CLIP))


def check_to_variable(psi_others) -> float:
    """Check message from the variable messages of the *other* neighbours."""
    prod = 1.0
    for p in np.asarray(psi_others, dtype=np.float64):
        prod *= np.tanh(np.clip(p / 2.0, -TANH_CLIP, TANH_CLIP))
    with np.errstate(divide="ignore"):
        return float(np.clip(2.0 * np.arctanh(prod), -MSG_CLIP, MSG_CLIP))


def compute_beliefs(llr_in, lam_in, rho_in) -> float:
    lam_in = np.asarray(lam_in, dtype=np.float64)
    rho_in = np.asarray(rho_in, dtype=np.float64)
    b = float(llr_in)
    for k in range(lam_in.size):
        b += rho_in[k] * lam_in[k]
    return b


# ------------------------------------------------------------- numba path


@jit
def _variable_pass(var_ptr, var_edges, edge_check, rho, llr, psi, lam, beliefs):
    # Psi_ji = b_j - Lam_ij, since rho_i Lam_ij + (1 - rho_i) Lam_ij = Lam_ij
    N = var_ptr.shape[0] - 1
    for j in range(N):
        lo = var_ptr[j]
        hi = var_ptr[j + 1]
        bj = llr[j]
        for a in range(lo, hi):
            e = var_edges[a]
            bj += rho[edge_check[e]] * lam[e]
        beliefs[j] = bj
        for a in range(lo, hi):
            e = var_edges[a]
            s = bj - lam[e]
            if s > 50.0:
                s = 50.0
            elif s < -50.0:
                s = -50.0
            psi[e] = s


@jit
def _flood_numba(check_ptr, edge_var, var_ptr, var_edges, edge_check,
                 rho, llr, max_iters, early_stop, warm, psi, lam, beliefs):
    M = check_ptr.shape[0] - 1
    E = edge_var.shape[0]
    t = np.empty(E, dtype=np.float64)
    pre = np.empty(E, dtype=np.float64)
    if warm:
        _variable_pass(var_ptr, var_edges, edge_check, rho, llr, psi, lam, beliefs)
    else:
        for e in range(E):
            psi[e] = llr[edge_var[e]]
            lam[e] = 0.0
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        for i in range(M):
            lo = check_ptr[i]
            hi = check_ptr[i + 1]
            acc = 1.0
            for e in range(lo, hi):
                x = psi[e] / 2.0
                if x > 19.0:
                    x = 19.0
                elif x < -19.0:
                    x = -19.0
                t[e] = np.tanh(x)
                pre[e] = acc
                acc *= t[e]
            acc = 1.0
            for e in range(hi - 1, lo - 1, -1):
                m = 2.0 * np.arctanh(pre[e] * acc)
                acc *= t[e]
                if m > 50.0:
                    m = 50.0
                elif m < -50.0:
                    m = -50.0
                lam[e] = m
        _variable_pass(var_ptr, var_edges, edge_check, rho, llr, psi, lam, beliefs)
        ok = True
        for i in range(M):
            par = 0
            for e in range(check_ptr[i], check_ptr[i + 1]):
                if beliefs[edge_var[e]] < 0.0:
                    par ^= 1
            if par:
                ok = False
                break
        converged = ok
        if ok and early_stop:
            break
    return it, converged


# ------------------------------------------------------------- numpy path


class _Padded:
    """Padded edge tables for the vectorized numpy kernel."""

    def __init__(self, H: ParityCheckMatrix):
        dc = H.check_degrees
        dv = H.var_degrees
        self.row_edges = -np.ones((H.M, int(dc.max())), dtype=np.int64)
        for i in range(H.M):
            self.row_edges[i, :dc[i]] = np.arange(H.check_ptr[i], H.check_ptr[i + 1])
        self.row_mask = self.row_edges >= 0
        self.var_mat = -np.ones((H.N, int(dv.max())), dtype=np.int64)
        for j in range(H.N):
            self.var_mat[j, :dv[j]] = H.var_edges[H.var_ptr[j]:H.var_ptr[j + 1]]
        self.var_mask = self.var_mat >= 0


def _flood_numpy(H: ParityCheckMatrix, pad: _Padded, rho, llr, max_iters,
                 early_stop, warm, psi, lam, beliefs):
    ev, ec = H.edge_var, H.edge_check
    re, rm = pad.row_edges, pad.row_mask
    rho_e = rho[ec]

    def variable_pass():
        beliefs[:] = llr + np.bincount(ev, weights=rho_e * lam, minlength=H.N)
        psi[:] = np.clip(beliefs[ev] - lam, -MSG_CLIP, MSG_CLIP)

    if warm:
        variable_pass()
    else:
        psi[:] = llr[ev]
        lam[:] = 0.0
    converged = False
    it = 0
    while it < max_iters:
        it += 1
        t = np.tanh(np.clip(psi / 2.0, -TANH_CLIP, TANH_CLIP))
        T = np.where(rm, t[np.where(rm, re, 0)], 1.0)
        ones = np.ones((T.shape[0], 1))
        prefix = np.cumprod(np.hstack([ones, T[:, :-1]]), axis=1)
        suffix = np.cumprod(np.hstack([ones, T[:, :0:-1]]), axis=1)[:, ::-1]
        excl = prefix * suffix
        with np.errstate(divide="ignore"):
            msg = np.clip(2.0 * np.arctanh(excl), -MSG_CLIP, MSG_CLIP)
        lam[re[rm]] = msg[rm]
        variable_pass()
        hard = (beliefs < 0).astype(np.int64)
        ok = not np.any(np.add.reduceat(hard[ev], H.check_ptr[:-1]) & 1)
        converged = ok
        if ok and early_stop:
            break
    return it, converged


# ------------------------------------------------------------- public API


@dataclass
class DecodeResult:
    bits: np.ndarray
    converged: bool
    iterations: int
    beliefs: np.ndarray
    extrinsic: np.ndarray


class ReweightedDecoder:
    """Flooding reweighted-BP decoder bound to a code and weight vector."""

    def __init__(self, H: ParityCheckMatrix, rho=1.0, use_numba: bool | None = None):
        self.H = H
        self.rho = validate_rho(rho, H.M)
        self.use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
        self._pad = None if self.use_numba else _Padded(H)

    def run(self, llr, max_iters: int, early_stop: bool = True, lam_init=None):
        """Low-level run returning ``(iters, converged, psi, lam, beliefs)``.

        ``lam_init`` (per edge) warm-starts the check messages; by default
        they start at zero.
        """
        H = self.H
        llr = np.ascontiguousarray(llr, dtype=np.float64)
        if llr.shape != (H.N,):
            raise ValueError(f"expected {H.N} input LLRs, got shape {llr.shape}")
        if max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        psi = np.empty(H.n_edges)
        warm = lam_init is not None
        if warm:
            lam = np.array(lam_init, dtype=np.float64)
            if lam.shape != (H.n_edges,):
                raise ValueError(f"lam_init must have {H.n_edges} entries")
        else:
            lam = np.empty(H.n_edges)
        beliefs = np.empty(H.N)
        if self.use_numba:
            it, ok = _flood_numba(H.check_ptr, H.edge_var, H.var_ptr, H.var_edges, H.edge_check,
                                  self.rho, llr, int(max_iters), early_stop, warm, psi, lam, beliefs)
        else:
            if self._pad is None:
                self._pad = _Padded(H)
            it, ok = _flood_numpy(H, self._pad, self.rho, llr, int(max_iters), early_stop, warm,
                                  psi, lam, beliefs)
        return int(it), bool(ok), psi, lam, beliefs

    def decode(self, llr, max_iters: int = 30) -> DecodeResult:
        llr = np.asarray(llr, dtype=np.float64)
        it, ok, _, _, b = self.run(llr, max_iters)
        bits = (b < 0).astype(np.uint8)
        return DecodeResult(bits, ok, it, b, b - llr)


def decode(H: ParityCheckMatrix, rho, llr, max_iters: int = 30) -> DecodeResult:
    return ReweightedDecoder(H, rho).decode(llr, max_iters)
