"""Offline choice of the reweighting vector.

* CKAR: two-level assignment from per-check short-cycle counts.
* URW: one uniform value.
* EKAR: conditional-gradient (Frank-Wolfe) optimization of per-subgraph
  weights, followed by picking the subgraph vector that decodes best.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel
from ._accel import jit
from .decoder import ReweightedDecoder, validate_rho
from .graph_analysis import (CycleCensus, Subgraph, average_connectivity, choose_expansion,
                             expand_subgraphs)
from .ldpc_code import DegreeDistribution, ParityCheckMatrix

RHO_MIN = 0.1
MAX_FACTOR_DEGREE = 24
LN2 = math.log(2.0)


class FapConfigError(ValueError):
    pass


# ---------------------------------------------------------------- CKAR / URW


def uniform_weight(alpha: float, n_d: float) -> float:
    """rho_v = 2 alpha / n_d."""
    if not 0.0 < alpha < 1.0:
        raise FapConfigError("alpha must lie in (0, 1)")
    if n_d <= 0:
        raise FapConfigError("average connectivity must be positive")
    rho_v = 2.0 * alpha / n_d
    if rho_v >= 1.0:
        raise FapConfigError(f"rho_v = {rho_v:.4f} >= 1 (average connectivity {n_d} < 2 alpha)")
    return rho_v


def ckar_assign(census: CycleCensus | np.ndarray, n_d: float, alpha: float) -> np.ndarray:
    """rho_i = 1 if check i lies on fewer short cycles than average, else rho_v."""
    delta = census.delta if isinstance(census, CycleCensus) else np.asarray(census)
    mu = float(np.mean(delta))
    rho_v = uniform_weight(alpha, n_d)
    return np.where(delta < mu, 1.0, rho_v)


def urw_assign(M: int, n_d: float, alpha: float) -> np.ndarray:
    return np.full(M, uniform_weight(alpha, n_d))


# ---------------------------------------------------------------- factor MI


@jit
def _factor_mi_numba(check_ptr, edge_var, psi, beliefs, out):
    M = check_ptr.shape[0] - 1
    for i in range(M):
        lo = check_ptr[i]
        d = check_ptr[i + 1] - lo
        # log P(x=0), log P(x=1) from incoming messages and from marginals
        lm0 = np.empty(d)
        lm1 = np.empty(d)
        lq0 = np.empty(d)
        lq1 = np.empty(d)
        for k in range(d):
            p = psi[lo + k]
            lm0[k] = -np.logaddexp(0.0, -p)
            lm1[k] = -np.logaddexp(0.0, p)
            b = beliefs[edge_var[lo + k]]
            lq0[k] = -np.logaddexp(0.0, -b)
            lq1[k] = -np.logaddexp(0.0, b)
        n_cfg = 1 << d
        la = np.empty(n_cfg)
        lq = np.empty(n_cfg)
        mx = -np.inf
        for x in range(n_cfg):
            s = 0.0
            q = 0.0
            par = 0
            for k in range(d):
                if (x >> k) & 1:
                    s += lm1[k]
                    q += lq1[k]
                    par ^= 1
                else:
                    s += lm0[k]
                    q += lq0[k]
            if par:
                s = -np.inf
            la[x] = s
            lq[x] = q
            if s > mx:
                mx = s
        z = 0.0
        for x in range(n_cfg):
            z += np.exp(la[x] - mx)
        lz = mx + np.log(z)
        kl = 0.0
        for x in range(n_cfg):
            lb = la[x] - lz
            pb = np.exp(lb)
            if pb > 0.0:
                kl += pb * (lb - lq[x])
        out[i] = max(kl / 0.6931471805599453, 0.0)


def _factor_mi_numpy(check_ptr, edge_var, psi, beliefs, out):
    deg = np.diff(check_ptr)
    for d in np.unique(deg):
        rows = np.flatnonzero(deg == d)
        idx = check_ptr[rows][:, None] + np.arange(d)[None, :]          # (n, d)
        cfg = ((np.arange(2 ** d)[:, None] >> np.arange(d)[None, :]) & 1).astype(bool)  # (X, d)
        par = cfg.sum(axis=1) & 1
        p = psi[idx]
        b = beliefs[edge_var[idx]]
        lm = np.stack([-np.logaddexp(0.0, -p), -np.logaddexp(0.0, p)], axis=-1)   # (n, d, 2)
        lq = np.stack([-np.logaddexp(0.0, -b), -np.logaddexp(0.0, b)], axis=-1)
        sel = cfg.astype(np.int64)                                       # (X, d)
        la = np.take_along_axis(lm[:, None, :, :], sel[None, :, :, None], axis=-1)[..., 0].sum(-1)
        lqx = np.take_along_axis(lq[:, None, :, :], sel[None, :, :, None], axis=-1)[..., 0].sum(-1)
        la = np.where(par[None, :] == 1, -np.inf, la)
        mx = la.max(axis=1, keepdims=True)
        lb = la - (mx + np.log(np.exp(la - mx).sum(axis=1, keepdims=True)))
        pb = np.exp(lb)
        with np.errstate(invalid="ignore"):
            kl = np.where(pb > 0, pb * (lb - lqx), 0.0).sum(axis=1)
        out[rows] = np.maximum(kl / LN2, 0.0)


def factor_mutual_information(code: ParityCheckMatrix, psi, beliefs,
                              use_numba: bool | None = None) -> np.ndarray:
    """Per-check KL divergence (bits) between factor belief and product of marginals.

    The factor belief of check i is proportional to its parity indicator
    times the incoming variable messages ``psi`` (per edge, LLR); the
    marginals are the variable ``beliefs`` (LLR).
    """
    deg = code.check_degrees
    if deg.max() > MAX_FACTOR_DEGREE:
        raise ValueError(f"factor degree {deg.max()} exceeds enumeration bound {MAX_FACTOR_DEGREE}")
    psi = np.ascontiguousarray(psi, dtype=np.float64)
    beliefs = np.ascontiguousarray(beliefs, dtype=np.float64)
    out = np.empty(code.M)
    use = _accel.USE_NUMBA if use_numba is None else use_numba
    (_factor_mi_numba if use else _factor_mi_numpy)(code.check_ptr, code.edge_var, psi, beliefs, out)
    return out


# ---------------------------------------------------------------- subgraph problem


def design_llrs(N: int, ebn0_db: float, rate: float, n_samples: int, seed) -> np.ndarray:
    """Channel LLRs of the all-zero codeword over BPSK/AWGN, shape (n_samples, N)."""
    rng = np.random.default_rng(seed)
    sigma2 = 1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))
    y = 1.0 + np.sqrt(sigma2) * rng.standard_normal((n_samples, N))
    return 2.0 * y / sigma2


def leaf_augmented_code(H: ParityCheckMatrix, sub: Subgraph):
    """Subgraph code in which every edge to a variable outside the subgraph
    ends in its own degree-1 copy of that variable.

    Returns ``(code, origin)`` where ``origin[j]`` is the global index of
    local variable j. Copies cannot close cycles, so the local girth is
    unchanged while every check keeps its full parity constraint.
    """
    vpos = {int(v): k for k, v in enumerate(sub.variables)}
    origin = [int(v) for v in sub.variables]
    in_sub = {(int(c), int(v)) for c, v in sub.edges}
    rows = []
    for c in sub.checks:
        row = []
        for v in H.rows[int(c)]:
            if (int(c), v) in in_sub:
                row.append(vpos[v])
            else:
                row.append(len(origin))
                origin.append(v)
        rows.append(row)
    return ParityCheckMatrix.from_rows(rows, len(origin)), np.asarray(origin, dtype=np.int64)


def _bound_terms(llr, beliefs):
    """Per-sample sum over variables of E[log2 phi_j] + H(b_j), in bits."""
    lp0 = -np.logaddexp(0.0, -beliefs)
    lp1 = -np.logaddexp(0.0, beliefs)
    p0 = np.exp(lp0)
    p1 = np.exp(lp1)
    energy = 0.5 * llr * (p0 - p1)
    entropy = -(p0 * lp0 + p1 * lp1)
    return float(np.sum(energy + entropy)) / LN2


class SubgraphObjective:
    """Subgraph objective f(rho) with I(rho) from refreshed message passing.

    ``kind="bound"`` (default): the full reweighted free-energy bound
    sum_j (E_b[log2 phi_j] + H(b_j)) - rho . I, whose rho-gradient is -I
    at a fixed point. It is tight at rho = 1 on acyclic subgraphs.
    ``kind="linear"``: only the explicit term, f(rho) = -rho . I(rho).

    Both are averaged over the LLR samples. Edges leaving the subgraph end
    in degree-1 copies of the outside variables (see ``leaf_augmented_code``).
    """

    KINDS = ("bound", "linear")

    def __init__(self, H: ParityCheckMatrix, sub: Subgraph, llr_samples: np.ndarray,
                 bp_iters: int = 10, use_numba: bool | None = None, kind: str = "bound"):
        if kind not in self.KINDS:
            raise FapConfigError(f"unknown objective kind {kind!r}")
        self.kind = kind
        self.sub = sub
        self.code, self.origin = leaf_augmented_code(H, sub)
        self.bp_iters = bp_iters
        self.use_numba = use_numba
        llr_samples = np.atleast_2d(llr_samples)
        self.llr = np.ascontiguousarray(llr_samples[:, self.origin])
        self.n_evals = 0

    def evaluate(self, rho):
        """Return ``(base, I)``: the rho-independent part and the factor MIs."""
        dec = ReweightedDecoder(self.code, rho, use_numba=self.use_numba)
        acc = np.zeros(self.code.M)
        base = 0.0
        for s in range(self.llr.shape[0]):
            _, _, psi, _, b = dec.run(self.llr[s], self.bp_iters, early_stop=False)
            acc += factor_mutual_information(self.code, psi, b, self.use_numba)
            base += _bound_terms(self.llr[s], b)
        self.n_evals += 1
        n = self.llr.shape[0]
        return base / n, acc / n

    def mutual_information(self, rho) -> np.ndarray:
        return self.evaluate(rho)[1]

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=np.float64)
        base, I = self.evaluate(rho)
        if self.kind == "linear":
            base = 0.0
        return base - float(rho @ I), I


# ---------------------------------------------------------------- conditional gradient


def cg_linear_minimizer(I, code: ParityCheckMatrix, rho_min: float = RHO_MIN) -> np.ndarray:
    """Minimize -rho . I over the relaxed FAP polytope.

    Checks are taken in decreasing I order and kept when their variables
    are still in distinct components (the chosen checks stay a forest);
    kept checks get weight 1, the rest ``rho_min``.
    """
    I = np.asarray(I, dtype=np.float64)
    parent = list(range(code.N))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    out = np.full(code.M, rho_min)
    for l in sorted(range(code.M), key=lambda k: (-I[k], k)):
        roots = [find(v) for v in code.rows[l]]
        if len(set(roots)) == len(roots):
            for r in roots[1:]:
                parent[r] = roots[0]
            out[l] = 1.0
    return out


@dataclass
class CgStep:
    rho: np.ndarray
    z: float
    f: float
    I: np.ndarray
    step: float
    f_lin: float


def cg_update(rho, rho_star, I, z, objective, f=None, n_grid: int = 21) -> CgStep:
    """One conditional-gradient step.

    Linearizes f at ``rho`` (gradient -I), tightens the lower bound
    z <- max(f_lin(rho_star), z), then moves to
    rho + a (rho_star - rho) with a from an ``n_grid``-point search on
    [0, 1] using ``objective(rho) -> (f, I)``. a = 0 is always a grid
    point, so f never increases.
    """
    rho = np.asarray(rho, dtype=np.float64)
    rho_star = np.asarray(rho_star, dtype=np.float64)
    I = np.asarray(I, dtype=np.float64)
    if f is None:
        f = -float(rho @ I)
    f_lin = f - float(I @ (rho_star - rho))
    z_new = max(f_lin, z)
    direction = rho_star - rho
    best = CgStep(rho, z_new, f, I, 0.0, f_lin)
    if not np.any(direction):
        return best
    for a in np.linspace(0.0, 1.0, n_grid)[1:]:
        cand = np.clip(rho + a * direction, 0.0, 1.0)
        fc, Ic = objective(cand)
        if fc < best.f:
            best = CgStep(cand, z_new, fc, Ic, float(a), f_lin)
    return best


@dataclass
class EkarResult:
    t: int
    checks: np.ndarray
    rho: np.ndarray
    converged: bool
    recursions: int
    f_history: list = field(default_factory=list)   # f(rho^(r)), r = 0..R
    z_history: list = field(default_factory=list)   # z^(r), r = 0..R (z^(0) = -inf)

    def to_dict(self) -> dict:
        return {
            "t": self.t, "checks": self.checks.tolist(), "rho": self.rho.tolist(),
            "converged": self.converged, "recursions": self.recursions,
            "f_history": self.f_history,
            "z_history": [None if math.isinf(z) else z for z in self.z_history],
        }


def optimize_subgraph(objective: SubgraphObjective, rho0, max_recursions: int = 600,
                      tol: float = 1e-6, rho_min: float = RHO_MIN, n_grid: int = 21) -> EkarResult:
    code = objective.code
    rho = np.full(code.M, float(rho0)) if np.isscalar(rho0) else np.asarray(rho0, dtype=np.float64)
    f, I = objective(rho)
    z = -math.inf
    fh, zh = [f], [z]
    converged = False
    r = 0
    while r < max_recursions:
        r += 1
        rho_star = cg_linear_minimizer(I, code, rho_min)
        step = cg_update(rho, rho_star, I, z, objective, f=f, n_grid=n_grid)
        delta = float(np.max(np.abs(step.rho - rho))) if rho.size else 0.0
        rho, z, f, I = step.rho, step.z, step.f, step.I
        fh.append(f)
        zh.append(z)
        if delta < tol:
            converged = True
            break
    return EkarResult(objective.sub.t, objective.sub.checks, rho, converged, r, fh, zh)


def ekar_optimize(H: ParityCheckMatrix, subgraphs: list[Subgraph], rho0: float,
                  ebn0_db: float = 2.0, n_samples: int = 4, bp_iters: int = 10,
                  max_recursions: int = 600, tol: float = 1e-6, rho_min: float = RHO_MIN,
                  seed=0, use_numba: bool | None = None, kind: str = "bound") -> list[EkarResult]:
    """Run the conditional-gradient recursion on every subgraph.

    All subgraphs share one seeded batch of design LLRs (all-zero codeword
    at ``ebn0_db`` over BPSK/AWGN).
    """
    llrs = design_llrs(H.N, ebn0_db, H.design_rate, n_samples, seed)
    out = []
    for sub in subgraphs:
        obj = SubgraphObjective(H, sub, llrs, bp_iters, use_numba, kind)
        out.append(optimize_subgraph(obj, rho0, max_recursions, tol, rho_min))
    return out


def lift(result: EkarResult, M: int) -> np.ndarray:
    """Global weight vector: optimized values on the subgraph's checks, 1 elsewhere."""
    rho = np.ones(M)
    rho[result.checks] = result.rho
    return rho


@dataclass
class Selection:
    index: int
    rho: np.ndarray
    fer: list
    mean_iters: list


def select_best_fap(H: ParityCheckMatrix, candidates, ebn0_db: float = 2.0, frames: int = 200,
                    max_iters: int = 30, seed=0) -> Selection:
    """Score each global weight vector by frame errors on one seeded batch.

    Lowest FER wins; ties go to fewer mean iterations, then lower index.
    """
    candidates = [validate_rho(c, H.M) for c in candidates]
    if not candidates:
        raise ValueError("no candidates to select from")
    llrs = design_llrs(H.N, ebn0_db, H.design_rate, frames, seed)
    fers, iters = [], []
    for rho in candidates:
        dec = ReweightedDecoder(H, rho)
        errs = 0
        it = 0
        for s in range(frames):
            res = dec.decode(llrs[s], max_iters)
            errs += int(res.bits.any())
            it += res.iterations
        fers.append(errs / frames)
        iters.append(it / frames)
    best = min(range(len(candidates)), key=lambda k: (fers[k], iters[k], k))
    return Selection(best, candidates[best], fers, iters)


@dataclass
class EkarOutcome:
    rho: np.ndarray
    d_max: int
    results: list
    selection: Selection

    def summary(self) -> dict:
        return {
            "d_max": self.d_max,
            "n_subgraphs": len(self.results),
            "selected": self.selection.index,
            "fer": self.selection.fer,
            "mean_iters": self.selection.mean_iters,
            "recursions": [r.recursions for r in self.results],
            "converged": [r.converged for r in self.results],
        }


def ekar_pipeline(H: ParityCheckMatrix, alpha: float = 0.85, d_max: int | None = None,
                  target: int = 20, ebn0_db: float = 2.0, n_samples: int = 4,
                  bp_iters: int = 10, max_recursions: int = 600, frames: int = 200,
                  seed=0, kind: str = "bound") -> EkarOutcome:
    """Expansion, per-subgraph optimization and selection in one call."""
    if d_max is None:
        d_max, subs = choose_expansion(H, target)
    else:
        subs = expand_subgraphs(H, d_max)
    n_d = average_connectivity(DegreeDistribution.from_code(H))
    rho0 = uniform_weight(alpha, n_d)
    results = ekar_optimize(H, subs, rho0, ebn0_db, n_samples, bp_iters, max_recursions,
                            seed=seed, kind=kind)
    sel = select_best_fap(H, [lift(r, H.M) for r in results], ebn0_db, frames, seed=seed)
    return EkarOutcome(sel.rho, d_max, results, sel)


# ---------------------------------------------------------------- persistence


def save_rho(path, rho, method: str, params: dict, H: ParityCheckMatrix, extra: dict | None = None):
    doc = {
        "method": method,
        "params": params,
        "code": {"digest": H.digest(), "N": H.N, "M": H.M},
        "rho": [float(x) for x in rho],
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_rho(path, H: ParityCheckMatrix | None = None) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    rho = doc["rho"] if isinstance(doc, dict) else doc
    if H is not None:
        if isinstance(doc, dict) and doc.get("code", {}).get("digest", H.digest()) != H.digest():
            raise ValueError("weight file was produced for a different code")
        return validate_rho(rho, H.M)
    return np.asarray(rho, dtype=np.float64)
