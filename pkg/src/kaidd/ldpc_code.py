"""LDPC code construction, encoding and alist I/O."""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from ._accel import jit


class CodeConstructionError(ValueError):
    pass


class AlistFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """Sparse binary M x N parity-check matrix / Tanner graph.

    ``rows[i]`` holds the sorted variable indices of check ``i`` and
    ``cols[j]`` the sorted check indices of variable ``j``.
    """

    M: int
    N: int
    rows: tuple
    cols: tuple

    def __post_init__(self):
        if len(self.rows) != self.M or len(self.cols) != self.N:
            raise ValueError("adjacency list lengths do not match M, N")
        seen = set()
        for i, r in enumerate(self.rows):
            if len(r) == 0:
                raise ValueError(f"check {i} has degree 0")
            if len(set(r)) != len(r):
                raise ValueError(f"duplicate edge in check {i}")
            for j in r:
                if not 0 <= j < self.N:
                    raise ValueError(f"variable index {j} out of range")
                seen.add((i, j))
        n_col_edges = 0
        for j, c in enumerate(self.cols):
            if len(c) == 0:
                raise ValueError(f"variable {j} has degree 0")
            if len(set(c)) != len(c):
                raise ValueError(f"duplicate edge in variable {j}")
            for i in c:
                if (i, j) not in seen:
                    raise ValueError(f"row/col adjacency mismatch at ({i}, {j})")
            n_col_edges += len(c)
        if n_col_edges != len(seen):
            raise ValueError("row/col adjacency mismatch")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], N: int) -> "ParityCheckMatrix":
        rows_t = tuple(tuple(sorted(int(j) for j in r)) for r in rows)
        cols: list[list[int]] = [[] for _ in range(N)]
        for i, r in enumerate(rows_t):
            for j in r:
                cols[j].append(i)
        return cls(len(rows_t), N, rows_t, tuple(tuple(c) for c in cols))

    @classmethod
    def from_dense(cls, H) -> "ParityCheckMatrix":
        H = np.asarray(H)
        if H.ndim != 2:
            raise ValueError("H must be 2-D")
        if not np.isin(H, (0, 1)).all():
            raise ValueError("H must be binary")
        return cls.from_rows([np.flatnonzero(row) for row in H], H.shape[1])

    def to_dense(self) -> np.ndarray:
        H = np.zeros((self.M, self.N), dtype=np.uint8)
        for i, r in enumerate(self.rows):
            H[i, list(r)] = 1
        return H

    def __eq__(self, other):
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return self.N == other.N and self.rows == other.rows

    def __hash__(self):
        return hash((self.N, self.rows))

    @property
    def n_edges(self) -> int:
        return int(self.check_ptr[-1])

    @property
    def var_degrees(self) -> np.ndarray:
        return np.diff(self.var_ptr)

    @property
    def check_degrees(self) -> np.ndarray:
        return np.diff(self.check_ptr)

    @property
    def design_rate(self) -> float:
        return 1.0 - self.M / self.N

    def digest(self) -> str:
        h = hashlib.sha256(f"{self.M} {self.N}".encode())
        for r in self.rows:
            h.update((",".join(map(str, r)) + ";").encode())
        return h.hexdigest()[:16]

    # Edge-indexed arrays used by the kernels. Edges are numbered in
    # check-major order; var_edges lists each variable's edges ordered by
    # check index.
    @cached_property
    def check_ptr(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum([len(r) for r in self.rows]))).astype(np.int64)

    @cached_property
    def edge_var(self) -> np.ndarray:
        return np.fromiter((j for r in self.rows for j in r), dtype=np.int64, count=int(self.check_ptr[-1]))

    @cached_property
    def edge_check(self) -> np.ndarray:
        return np.repeat(np.arange(self.M, dtype=np.int64), np.diff(self.check_ptr))

    @cached_property
    def var_ptr(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum([len(c) for c in self.cols]))).astype(np.int64)

    @cached_property
    def var_edges(self) -> np.ndarray:
        order = np.lexsort((self.edge_check, self.edge_var))
        return order.astype(np.int64)


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree polynomials.

    ``variable[i]`` is the coefficient of x**i in the variable-node
    polynomial (fraction of edges attached to degree-(i+1) variables);
    likewise ``check`` for check nodes.
    """

    variable: tuple
    check: tuple = ()

    def __post_init__(self):
        for name in ("variable", "check"):
            coeffs = getattr(self, name)
            if not coeffs:
                continue
            if any(c < 0 for c in coeffs):
                raise ValueError(f"{name} coefficients must be nonnegative")
            if abs(sum(coeffs) - 1.0) > 1e-9:
                raise ValueError(f"{name} coefficients must sum to 1")

    @classmethod
    def regular(cls, dv: int, dc: int | None = None) -> "DegreeDistribution":
        var = tuple(1.0 if i == dv - 1 else 0.0 for i in range(dv))
        chk = tuple(1.0 if i == dc - 1 else 0.0 for i in range(dc)) if dc else ()
        return cls(var, chk)

    @classmethod
    def from_code(cls, H: ParityCheckMatrix) -> "DegreeDistribution":
        def edge_fractions(deg):
            counts = np.bincount(deg) * np.arange(deg.max() + 1)
            frac = counts[1:] / counts.sum()
            return tuple(float(f) for f in frac)

        return cls(edge_fractions(H.var_degrees), edge_fractions(H.check_degrees))


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Systematic generator obtained by Gauss-Jordan elimination of H."""

    G: np.ndarray
    info_positions: np.ndarray
    parity_positions: np.ndarray
    parity_map: np.ndarray = field(repr=False)  # parity bits = parity_map @ info bits (mod 2)

    @property
    def K(self) -> int:
        return self.G.shape[0]

    @property
    def N(self) -> int:
        return self.G.shape[1]

    @classmethod
    def from_parity_check(cls, H: ParityCheckMatrix) -> "GeneratorMatrix":
        A = H.to_dense().astype(bool)
        M, N = A.shape
        pivots = []
        row = 0
        for col in range(N):
            if row == M:
                break
            nz = np.flatnonzero(A[row:, col])
            if nz.size == 0:
                continue
            p = row + nz[0]
            if p != row:
                A[[row, p]] = A[[p, row]]
            others = np.flatnonzero(A[:, col])
            others = others[others != row]
            A[others] ^= A[row]
            pivots.append(col)
            row += 1
        rank = row
        pivots = np.array(pivots, dtype=np.int64)
        info = np.setdiff1d(np.arange(N), pivots)
        P = A[:rank][:, info].astype(np.uint8)
        K = N - rank
        G = np.zeros((K, N), dtype=np.uint8)
        G[np.arange(K), info] = 1
        G[:, pivots] = P.T
        return cls(G, info, pivots, P)


def encode(gen: GeneratorMatrix, msg) -> np.ndarray:
    """Encode ``msg`` (length K, or shape (..., K)) into codeword bits."""
    msg = np.asarray(msg, dtype=np.uint8)
    if msg.shape[-1] != gen.K:
        raise ValueError(f"message length {msg.shape[-1]} != K_info {gen.K}")
    out = np.zeros(msg.shape[:-1] + (gen.N,), dtype=np.uint8)
    out[..., gen.info_positions] = msg
    out[..., gen.parity_positions] = (msg.astype(np.int64) @ gen.parity_map.T.astype(np.int64)) & 1
    return out


def syndrome(H: ParityCheckMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    if x.shape[-1] != H.N:
        raise ValueError(f"vector length {x.shape[-1]} != N {H.N}")
    return _syndrome(H.check_ptr, H.edge_var, x)


def _syndrome(check_ptr, edge_var, x):
    vals = x[..., edge_var].astype(np.int64)
    return (np.add.reduceat(vals, check_ptr[:-1], axis=-1) & 1).astype(np.uint8)


# ---------------------------------------------------------------- PEG


@jit
def _peg_kernel(N, M, dv, cap, priority):
    var_adj = -np.ones((N, dv), dtype=np.int64)
    chk_adj = -np.ones((M, cap), dtype=np.int64)
    chk_deg = np.zeros(M, dtype=np.int64)
    depth = np.empty(M, dtype=np.int64)
    vseen = np.zeros(N, dtype=np.bool_)
    queue_v = np.empty(N, dtype=np.int64)
    for j in range(N):
        for k in range(dv):
            prio = priority[j * dv + k]
            if k == 0:
                best = -1
                for c in range(M):
                    if chk_deg[c] >= cap:
                        continue
                    if best < 0 or chk_deg[c] < chk_deg[best] or (
                            chk_deg[c] == chk_deg[best] and prio[c] < prio[best]):
                        best = c
            else:
                # BFS over the current graph from variable j, levels in check hops.
                depth[:] = -1
                vseen[:] = False
                vseen[j] = True
                head = 0
                tail = 0
                queue_v[tail] = j
                tail += 1
                level = 0
                while head < tail:
                    level += 1
                    stop = tail
                    while head < stop:
                        v = queue_v[head]
                        head += 1
                        for a in range(dv):
                            c = var_adj[v, a]
                            if c < 0 or depth[c] >= 0:
                                continue
                            depth[c] = level
                            for b in range(chk_deg[c]):
                                u = chk_adj[c, b]
                                if not vseen[u]:
                                    vseen[u] = True
                                    queue_v[tail] = u
                                    tail += 1
                any_unreached = False
                max_depth = -1
                for c in range(M):
                    if chk_deg[c] >= cap:
                        continue
                    if depth[c] < 0:
                        any_unreached = True
                    elif depth[c] > max_depth:
                        max_depth = depth[c]
                best = -1
                for c in range(M):
                    if chk_deg[c] >= cap:
                        continue
                    if any_unreached:
                        if depth[c] >= 0:
                            continue
                    elif depth[c] != max_depth:
                        continue
                    if best < 0 or chk_deg[c] < chk_deg[best] or (
                            chk_deg[c] == chk_deg[best] and prio[c] < prio[best]):
                        best = c
            if best < 0:
                return var_adj, False
            for a in range(dv):
                if var_adj[j, a] == best:
                    return var_adj, False
            var_adj[j, k] = best
            chk_adj[best, chk_deg[best]] = j
            chk_deg[best] += 1
    return var_adj, True


def _break_four_cycles(A: np.ndarray, rng: np.random.Generator, max_rounds: int = 1000) -> np.ndarray:
    """Degree-preserving edge swaps until no two variables share two checks."""
    A = A.copy()
    for _ in range(max_rounds):
        overlap = A.T.astype(np.int64) @ A.astype(np.int64)
        np.fill_diagonal(overlap, 0)
        bad = np.argwhere(overlap >= 2)
        if bad.size == 0:
            return A
        v1, v = bad[np.lexsort((bad[:, 0], -bad[:, 1]))[0]]
        c = int(np.flatnonzero(A[:, v] & A[:, v1])[0])
        partners = np.argwhere(A == 1)
        partners = partners[rng.permutation(len(partners))]
        for c2, v2 in partners:
            if c2 == c or v2 == v or A[c2, v] or A[c, v2]:
                continue
            A[c, v] = A[c2, v2] = 0
            A[c, v2] = A[c2, v] = 1
            ov = A.T.astype(np.int64) @ A[:, [v, v2]].astype(np.int64)
            ov[v, 0] = ov[v2, 1] = 0
            if ov.max() < 2:
                break
            A[c, v2] = A[c2, v] = 0
            A[c, v] = A[c2, v2] = 1
        else:
            raise CodeConstructionError("could not remove length-4 cycles")
    raise CodeConstructionError("could not remove length-4 cycles")


def peg_construct(N: int, M: int, variable_degree: int, seed: int | None = 0) -> ParityCheckMatrix:
    """Progressive-edge-growth construction of a regular code.

    Each new edge of variable ``j`` goes to a check at maximal BFS distance
    from ``j`` (or unreachable), among checks below the check-degree cap
    ``N * dv / M``. Ties: lowest current degree, then a random key drawn
    from ``seed`` per placement (lowest index when ``seed`` is None).
    The hard degree cap can force a length-4 cycle among the last
    variables placed; those are removed by degree-preserving edge swaps
    (drawn from ``seed``, or a fixed stream when ``seed`` is None).
    """
    if variable_degree < 2:
        raise CodeConstructionError("variable degree must be >= 2")
    if not N > M >= 1:
        raise CodeConstructionError("need N > M >= 1")
    if (N * variable_degree) % M:
        raise CodeConstructionError("N * variable_degree must be divisible by M for regular checks")
    if variable_degree > M:
        raise CodeConstructionError("variable degree exceeds number of checks")
    cap = N * variable_degree // M
    # the 4-cycle repair always needs a stream; seed=None must stay reproducible
    rng = np.random.default_rng(0 if seed is None else seed)
    if seed is None:
        priority = np.tile(np.arange(M, dtype=np.int64), (N * variable_degree, 1))
    else:
        priority = np.argsort(rng.random((N * variable_degree, M)), axis=1).astype(np.int64)
    var_adj, ok = _peg_kernel(N, M, variable_degree, cap, priority)
    if not ok:
        raise CodeConstructionError("PEG could not place all edges under the degree constraints")
    A = np.zeros((M, N), dtype=np.uint8)
    for j in range(N):
        A[var_adj[j], j] = 1
    if M > 1:
        try:
            A = _break_four_cycles(A, rng)
        except CodeConstructionError:
            # e.g. more degree-2 columns than check pairs: 4-cycles are unavoidable
            warnings.warn("PEG code keeps length-4 cycles", stacklevel=2)
    return ParityCheckMatrix.from_dense(A)


# ---------------------------------------------------------------- alist


def save_alist(H: ParityCheckMatrix, path) -> None:
    vdeg = H.var_degrees
    cdeg = H.check_degrees
    dv_max = int(vdeg.max())
    dc_max = int(cdeg.max())
    lines = [f"{H.N} {H.M}", f"{dv_max} {dc_max}",
             " ".join(map(str, vdeg)), " ".join(map(str, cdeg))]
    for c in H.cols:
        lines.append(" ".join(str(i + 1) for i in c) + " 0" * (dv_max - len(c)))
    for r in H.rows:
        lines.append(" ".join(str(j + 1) for j in r) + " 0" * (dc_max - len(r)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_alist(path) -> ParityCheckMatrix:
    text = Path(path).read_text()
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        ints = [[int(t) for t in ln] for ln in lines]
    except ValueError as exc:
        raise AlistFormatError(f"non-integer token: {exc}") from None
    if len(ints) < 4 or len(ints[0]) != 2 or len(ints[1]) != 2:
        raise AlistFormatError("malformed header")
    N, M = ints[0]
    if N <= 0 or M <= 0:
        raise AlistFormatError("malformed header")
    vdeg, cdeg = ints[2], ints[3]
    if len(vdeg) != N or len(cdeg) != M:
        raise AlistFormatError("degree list length mismatch")
    if len(ints) != 4 + N + M:
        raise AlistFormatError(f"expected {N + M} adjacency lines, got {len(ints) - 4}")
    col_lists = ints[4:4 + N]
    row_lists = ints[4 + N:]

    def strip(lst, bound, deg, what, idx):
        vals = [v for v in lst if v != 0]
        if any(not 1 <= v <= bound for v in vals):
            raise AlistFormatError(f"{what} {idx + 1}: index out of range 1..{bound}")
        if len(vals) != deg:
            raise AlistFormatError(f"{what} {idx + 1}: degree {len(vals)} != declared {deg}")
        return [v - 1 for v in vals]

    rows = [strip(r, N, cdeg[i], "row", i) for i, r in enumerate(row_lists)]
    cols = [strip(c, M, vdeg[j], "column", j) for j, c in enumerate(col_lists)]
    try:
        H = ParityCheckMatrix.from_rows(rows, N)
    except ValueError as exc:
        raise AlistFormatError(str(exc)) from None
    if [sorted(c) for c in cols] != [list(c) for c in H.cols]:
        raise AlistFormatError("inconsistent row/column adjacency")
    return H
