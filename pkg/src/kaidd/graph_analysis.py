"""Tanner-graph analysis: girth, short-cycle census, connectivity, expansion."""
from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._accel import jit
from .ldpc_code import DegreeDistribution, ParityCheckMatrix


@jit
def _girth_kernel(N, var_ptr, var_edges, edge_check, check_ptr, edge_var):
    M = check_ptr.shape[0] - 1
    n_nodes = N + M
    dist = np.empty(n_nodes, dtype=np.int64)
    parent = np.empty(n_nodes, dtype=np.int64)
    queue = np.empty(n_nodes, dtype=np.int64)
    best = 1 << 60
    for root in range(N):
        dist[:] = -1
        dist[root] = 0
        parent[root] = -1
        head = 0
        tail = 1
        queue[0] = root
        while head < tail:
            u = queue[head]
            head += 1
            if 2 * dist[u] + 1 >= best:
                break
            if u < N:
                lo = var_ptr[u]
                hi = var_ptr[u + 1]
            else:
                lo = check_ptr[u - N]
                hi = check_ptr[u - N + 1]
            for k in range(lo, hi):
                if u < N:
                    e = var_edges[k]
                    w = N + edge_check[e]
                else:
                    e = k
                    w = edge_var[e]
                if e == parent[u]:
                    continue
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = e
                    queue[tail] = w
                    tail += 1
                else:
                    cyc = dist[u] + dist[w] + 1
                    if cyc < best:
                        best = cyc
    return best


def girth(H: ParityCheckMatrix):
    """Length of the shortest cycle of the Tanner graph, ``math.inf`` if acyclic."""
    g = _girth_kernel(H.N, H.var_ptr, H.var_edges, H.edge_check, H.check_ptr, H.edge_var)
    return math.inf if g >= (1 << 60) else int(g)


# ---------------------------------------------------------------- cycles


@dataclass
class CycleCensus:
    girth: float
    per_check: dict = field(default_factory=dict)   # length -> int array (M,)
    selected: tuple = ()                             # lengths aggregated into delta

    @property
    def delta(self) -> np.ndarray:
        """Per-check cycle count over the selected lengths (unit weights)."""
        lengths = self.selected or (self.girth,)
        M = len(next(iter(self.per_check.values())))
        out = np.zeros(M, dtype=np.int64)
        for L in lengths:
            if L in self.per_check:
                out += self.per_check[L]
        return out

    @property
    def mu(self) -> float:
        d = self.delta
        return float(d.mean()) if d.size else 0.0

    def total(self, length: int) -> int:
        """Number of distinct cycles of ``length`` in the whole graph."""
        return int(self.per_check[length].sum() // (length // 2))

    def to_dict(self) -> dict:
        return {
            "girth": None if math.isinf(self.girth) else int(self.girth),
            "selected": list(self.selected),
            "mu": self.mu,
            "totals": {str(L): self.total(L) for L in self.per_check},
            "per_check": {str(L): v.tolist() for L, v in self.per_check.items()},
        }


def _nonbacktracking_matrix(H: ParityCheckMatrix) -> sp.csr_matrix:
    """Hashimoto matrix on the 2E directed edges.

    Directed edge ``e`` (0 <= e < E) runs check->variable along Tanner edge e,
    ``E + e`` runs variable->check. Column convention: ``B[d2, d1] = 1`` if
    d2 can follow d1 without reversing it.
    """
    E = H.n_edges
    rows, cols = [], []
    # check->var (e) followed by var->check (E+f), f another edge at the same variable
    for j in range(H.N):
        es = H.var_edges[H.var_ptr[j]:H.var_ptr[j + 1]]
        for e in es:
            for f in es:
                if f != e:
                    rows.append(E + f)
                    cols.append(e)
    # var->check (E+e) followed by check->var (f), f another edge at the same check
    for i in range(H.M):
        es = range(H.check_ptr[i], H.check_ptr[i + 1])
        for e in es:
            for f in es:
                if f != e:
                    rows.append(f)
                    cols.append(E + e)
    data = np.ones(len(rows), dtype=np.int64)
    return sp.csr_matrix((data, (rows, cols)), shape=(2 * E, 2 * E))


def _closed_nb_walks_at_checks(H: ParityCheckMatrix, lengths, block: int = 512) -> dict:
    """Cyclically non-backtracking closed walks rooted at each check."""
    B = _nonbacktracking_matrix(H)
    E = H.n_edges
    Lmax = max(lengths)
    out = {L: np.zeros(H.M, dtype=np.int64) for L in lengths}
    for start in range(0, E, block):
        idx = np.arange(start, min(start + block, E))
        X = sp.csr_matrix((np.ones(idx.size, dtype=np.int64), (idx, np.arange(idx.size))),
                          shape=(2 * E, idx.size))
        X = X.toarray()
        for step in range(1, Lmax + 1):
            X = B @ X
            if step in out:
                np.add.at(out[step], H.edge_check[idx], X[idx, np.arange(idx.size)])
    return out


def _four_cycle_walks(H: ParityCheckMatrix):
    """All directed 4-cycle walks as node tuples (vars j, checks N+i)."""
    N = H.N
    walks = []
    for a in range(H.M):
        ra = set(H.rows[a])
        for b in range(a + 1, H.M):
            shared = sorted(ra.intersection(H.rows[b]))
            for p in range(len(shared)):
                for q in range(p + 1, len(shared)):
                    walks.append((N + a, shared[p], N + b, shared[q]))
    directed = []
    for w in walks:
        for r in range(4):
            rot = w[r:] + w[:r]
            directed.append(rot)
            directed.append((rot[0],) + tuple(reversed(rot[1:])))
    return directed


def _nonsimple_length8_walks(H: ParityCheckMatrix) -> np.ndarray:
    """Rooted cyclically-NB closed 8-walks at each check that are not 8-cycles.

    In a girth-4 graph these are exactly two 4-cycles spliced at a common
    node (including one 4-cycle traversed twice).
    """
    by_start: dict[int, list] = {}
    for w in _four_cycle_walks(H):
        by_start.setdefault(w[0], []).append(w)
    seen = set()
    for x, ws in by_start.items():
        for P in ws:
            for Q in ws:
                # junction at x in both directions must not reverse an edge
                if P[3] == Q[1] or Q[3] == P[1]:
                    continue
                walk = P + Q
                for s in range(8):
                    seen.add(walk[s:] + walk[:s])
    counts = np.zeros(H.M, dtype=np.int64)
    for walk in seen:
        if walk[0] >= H.N:
            counts[walk[0] - H.N] += 1
    return counts


def count_short_cycles(H: ParityCheckMatrix, lengths=None, select=None) -> CycleCensus:
    """Per-check counts of cycles of length g, g+2, g+4 (default all three).

    Counts come from powers of the non-backtracking edge matrix: a rooted
    cyclically non-backtracking closed walk shorter than 2g is a simple
    cycle traversed in one of two directions. The only length < g+6 that
    reaches 2g is g+4 when g == 4, handled by subtracting spliced 4-cycles.
    ``select`` picks the lengths aggregated into ``delta`` (default: g).
    """
    g = girth(H)
    if lengths is None:
        lengths = () if math.isinf(g) else (g, g + 2, g + 4)
    lengths = tuple(int(L) for L in lengths)
    for L in lengths:
        if L % 2 or L < 4:
            raise ValueError(f"cycle length must be even and >= 4, got {L}")
    if math.isinf(g) or not lengths:
        per = {L: np.zeros(H.M, dtype=np.int64) for L in (lengths or (4,))}
        return CycleCensus(g, per, tuple(select or ()))
    walks = _closed_nb_walks_at_checks(H, lengths)
    per = {}
    for L in lengths:
        w = walks[L]
        if L < g:
            w = np.zeros_like(w)
        elif L >= 2 * g:
            if L != 8 or g != 4:
                raise ValueError(f"length {L} >= 2*girth only supported for g=4, L=8")
            w = w - _nonsimple_length8_walks(H)
        per[L] = w // 2
    sel = tuple(select) if select else (g,)
    return CycleCensus(g, per, sel)


# ---------------------------------------------------------------- connectivity


def average_connectivity(dd: DegreeDistribution, M: int | None = None, N: int | None = None,
                         strict: bool = False) -> float:
    """Average variable-node connectivity ``1 / int_0^1 v(x) dx``.

    When a check polynomial and M, N are supplied the alternative form
    ``M / (N int_0^1 c(x) dx)`` is evaluated too; disagreement beyond 1e-9
    warns (raises if ``strict``).
    """
    integral = sum(c / (k + 1) for k, c in enumerate(dd.variable))
    if integral <= 0:
        raise ValueError("variable polynomial integrates to zero")
    nd = 1.0 / integral
    if dd.check and M and N:
        ci = sum(c / (k + 1) for k, c in enumerate(dd.check))
        if ci <= 0:
            raise ValueError("check polynomial integrates to zero")
        alt = M / (N * ci)
        if abs(alt - nd) > 1e-9:
            msg = f"inconsistent degree distribution: {nd} vs {alt}"
            if strict:
                raise ValueError(msg)
            warnings.warn(msg, stacklevel=2)
    return nd


# ---------------------------------------------------------------- expansion


@dataclass
class Subgraph:
    t: int
    checks: np.ndarray       # global check indices, ascending
    variables: np.ndarray    # global variable indices, ascending
    edges: np.ndarray        # (n_edges, 2) of (check, variable) global indices
    local_girth: float

    @property
    def L(self) -> int:
        return len(self.checks)

    def local_code(self) -> ParityCheckMatrix:
        vpos = {v: k for k, v in enumerate(self.variables)}
        rows: list[list[int]] = [[] for _ in self.checks]
        cpos = {c: k for k, c in enumerate(self.checks)}
        for c, v in self.edges:
            rows[cpos[c]].append(vpos[v])
        return ParityCheckMatrix.from_rows(rows, len(self.variables))

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "checks": self.checks.tolist(),
            "variables": self.variables.tolist(),
            "edges": self.edges.tolist(),
            "local_girth": None if math.isinf(self.local_girth) else int(self.local_girth),
        }


def _sp_len(adj, src, dst, limit):
    """Shortest path length src->dst in adjacency dict, or None beyond limit."""
    if src == dst:
        return 0
    seen = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        d = seen[u]
        if d >= limit:
            break
        for w in adj[u]:
            if w not in seen:
                if w == dst:
                    return d + 1
                seen[w] = d + 1
                q.append(w)
    return None


def _expand_one(H: ParityCheckMatrix, seed: int, d_max: int, g) -> tuple:
    # nodes keyed as ('v', j) / ('c', i)
    adj: dict = {("v", seed): []}
    edges = []
    limit = g if not math.isinf(g) else 0

    def try_add(vnode, cnode):
        if vnode in adj and cnode in adj:
            if limit:
                d = _sp_len(adj, vnode, cnode, limit)
                if d is not None and d + 1 <= limit:
                    return False
            else:
                return False
        adj.setdefault(vnode, []).append(cnode)
        adj.setdefault(cnode, []).append(vnode)
        edges.append((cnode[1], vnode[1]))
        return True

    frontier = [seed]
    for level in range(1, d_max + 1):
        new_checks = []
        for v in frontier:
            for c in H.cols[v]:
                cn = ("c", c)
                if cn in adj and ("v", v) in adj[cn]:
                    continue
                fresh = cn not in adj
                if try_add(("v", v), cn) and fresh:
                    new_checks.append(c)
        if level == d_max:
            break
        new_frontier = []
        for c in new_checks:
            for u in H.rows[c]:
                un = ("v", u)
                if un in adj and ("c", c) in adj[un]:
                    continue
                fresh = un not in adj
                if try_add(un, ("c", c)) and fresh:
                    new_frontier.append(u)
        if not new_frontier:
            break
        frontier = new_frontier
    checks = np.array(sorted(k[1] for k in adj if k[0] == "c"), dtype=np.int64)
    variables = np.array(sorted(k[1] for k in adj if k[0] == "v"), dtype=np.int64)
    e = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return checks, variables, e


def expand_subgraphs(H: ParityCheckMatrix, d_max: int, seed: int | None = None) -> list[Subgraph]:
    """PEG-style expansion of H into subgraphs rooted at uncovered variables.

    Each subgraph grows breadth-first from its root variable for ``d_max``
    variable-to-check levels; an edge that would close a cycle of length
    <= girth(H) is left out. Roots are taken in ascending variable order
    (rotated by ``seed`` if given) until every variable is covered.
    """
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    g = girth(H)
    covered = np.zeros(H.N, dtype=bool)
    order = np.arange(H.N)
    if seed is not None:
        order = np.roll(order, -int(seed) % H.N)
    subs = []
    for root in order:
        if covered[root]:
            continue
        checks, variables, edges = _expand_one(H, int(root), d_max, g)
        covered[variables] = True
        sg = Subgraph(len(subs), checks, variables, edges, math.inf)
        sg.local_girth = girth(sg.local_code())
        subs.append(sg)
    return subs


def choose_expansion(H: ParityCheckMatrix, target: int = 20, depths=range(1, 7),
                     rule: str = "closest"):
    """Pick an expansion depth by the number of subgraphs it yields.

    ``rule="closest"``: the depth whose subgraph count is nearest ``target``
    (ties go to the smaller depth). ``rule="at_most"``: the smallest depth
    with at most ``target`` subgraphs, else the depth with the fewest.
    Returns ``(d_max, subgraphs)``.
    """
    if rule not in ("closest", "at_most"):
        raise ValueError(f"unknown rule {rule!r}")
    tried = []
    for d in depths:
        subs = expand_subgraphs(H, d)
        tried.append((d, subs))
        if rule == "at_most" and len(subs) <= target:
            return d, subs
        if len(subs) == 1:
            break
    if rule == "closest":
        return min(tried, key=lambda ds: (abs(len(ds[1]) - target), ds[0]))
    return min(tried, key=lambda ds: (len(ds[1]), ds[0]))
