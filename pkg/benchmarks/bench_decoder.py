"""Numba vs pure-numpy timings of the hot kernels.

    python3 benchmarks/bench_decoder.py [--frames 50] [--ebn0 1.5]

Both paths run in one process on the same inputs; the jitted kernels are
warmed up (compiled) before timing. Also checks that both paths agree.
"""
import argparse
import time

import numpy as np

from kaidd import _accel
from kaidd.decoder import ReweightedDecoder
from kaidd.fap_optimization import design_llrs, factor_mutual_information
from kaidd.graph_analysis import _girth_kernel
from kaidd.ldpc_code import _peg_kernel, peg_construct


def timed(fn, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        out = fn()
    return (time.perf_counter() - t0) / reps, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=50)
    ap.add_argument("--ebn0", type=float, default=1.5)
    ap.add_argument("--iters", type=int, default=30)
    args = ap.parse_args()
    if not _accel.USE_NUMBA:
        raise SystemExit("numba disabled (KAIDD_DISABLE_NUMBA set); nothing to compare")

    H = peg_construct(1000, 500, 3, seed=None)
    llrs = design_llrs(H.N, args.ebn0, H.design_rate, args.frames, seed=1)
    rho = np.where(np.arange(H.M) % 3 == 0, 0.8, 1.0)

    rows = []
    results = {}
    for label, flag in (("numba", True), ("numpy", False)):
        dec = ReweightedDecoder(H, rho, use_numba=flag)
        dec.run(llrs[0], 2)                                    # warm-up / compile
        t0 = time.perf_counter()
        outs = [dec.run(x, args.iters) for x in llrs]
        t_dec = (time.perf_counter() - t0) / len(llrs)
        _, _, psi, _, b = outs[0]
        factor_mutual_information(H, psi, b, use_numba=flag)   # warm-up
        t_mi, mi = timed(lambda: factor_mutual_information(H, psi, b, use_numba=flag), 5)
        results[label] = (outs, mi)
        rows.append((label, t_dec, t_mi))

    print(f"code N={H.N} M={H.M}, {args.frames} frames at Eb/N0={args.ebn0} dB, <= {args.iters} iterations")
    print(f"{'path':8s} {'decode [ms]':>12s} {'factor MI [ms]':>15s}")
    for label, t_dec, t_mi in rows:
        print(f"{label:8s} {1e3 * t_dec:12.3f} {1e3 * t_mi:15.3f}")
    print(f"speed-up  decode x{rows[1][1] / rows[0][1]:.2f}   factor MI x{rows[1][2] / rows[0][2]:.2f}")

    (on, mi_a), (off, mi_b) = results["numba"], results["numpy"]
    same_iters = all(a[0] == b[0] for a, b in zip(on, off))
    dev = max(np.max(np.abs(a[4] - b[4])) for a, b in zip(on, off))
    print(f"agreement: iterations identical={same_iters}, max belief diff={dev:.2e}, "
          f"max MI diff={np.max(np.abs(mi_a - mi_b)):.2e}")

    # graph kernels: the fallback here is the plain-python loop body
    gargs = (H.N, H.var_ptr, H.var_edges, H.edge_check, H.check_ptr, H.edge_var)
    _girth_kernel(*gargs)
    t_gj, g_j = timed(lambda: _girth_kernel(*gargs), 3)
    t_gp, g_p = timed(lambda: _girth_kernel.py_func(*gargs), 1)
    n, m = 200, 100
    prio = np.tile(np.arange(m, dtype=np.int64), (3 * n, 1))
    _peg_kernel(n, m, 3, 6, prio)
    t_pj, (adj_j, _) = timed(lambda: _peg_kernel(n, m, 3, 6, prio), 3)
    t_pp, (adj_p, _) = timed(lambda: _peg_kernel.py_func(n, m, 3, 6, prio), 1)
    print(f"girth N={H.N}:      numba {1e3 * t_gj:9.2f} ms   python {1e3 * t_gp:9.2f} ms   "
          f"x{t_gp / t_gj:.0f}  same={g_j == g_p}")
    print(f"PEG N={n}, M={m}:  numba {1e3 * t_pj:9.2f} ms   python {1e3 * t_pp:9.2f} ms   "
          f"x{t_pp / t_pj:.0f}  same={np.array_equal(adj_j, adj_p)}")


if __name__ == "__main__":
    main()
