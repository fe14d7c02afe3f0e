"""Command-line entry point (``kaidd``).

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .exit_chart import default_grid, exit_decoder_curve, exit_detector_curve
from .fap_optimization import (FapConfigError, ckar_assign, ekar_pipeline, load_rho, save_rho,
                               urw_assign)
from .graph_analysis import (average_connectivity, choose_expansion, count_short_cycles,
                             expand_subgraphs, girth)
from .idd import ConfigError, IddConfig, load_code, monte_carlo, write_results
from .ldpc_code import (AlistFormatError, CodeConstructionError, DegreeDistribution, load_alist,
                        peg_construct, save_alist)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _finite(x):
    return None if x is None or (isinstance(x, float) and not np.isfinite(x)) else x


def _load(path) -> "object":
    try:
        return load_alist(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except AlistFormatError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_build_code(a) -> int:
    H = peg_construct(a.n, a.m, a.dv, seed=a.seed)
    save_alist(H, a.out)
    g = girth(H)
    print(f"wrote {a.out}: N={H.N} M={H.M} girth={g} digest={H.digest()}")
    return EXIT_OK


def cmd_analyze(a) -> int:
    H = _load(a.alist)
    g = girth(H)
    dd = DegreeDistribution.from_code(H)
    report = {"N": H.N, "M": H.M, "digest": H.digest(), "girth": _finite(g),
              "average_connectivity": average_connectivity(dd, H.M, H.N)}
    if a.cycles:
        census = count_short_cycles(H)
        report["cycles"] = census.to_dict()
    if a.expand:
        if a.dmax is None:
            d, subs = choose_expansion(H)
        else:
            d, subs = a.dmax, expand_subgraphs(H, a.dmax)
        report["d_max"] = d
        report["subgraphs"] = [s.to_dict() for s in subs]
    text = json.dumps(report, indent=1)
    if a.out:
        Path(a.out).write_text(text + "\n")
        print(f"wrote {a.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_optimize(a) -> int:
    H = _load(a.alist)
    n_d = average_connectivity(DegreeDistribution.from_code(H))
    params = {"alpha": a.alpha, "n_d": n_d}
    extra = None
    if a.method == "urw":
        rho = urw_assign(H.M, n_d, a.alpha)
    elif a.method == "ckar":
        census = count_short_cycles(H)
        rho = ckar_assign(census, n_d, a.alpha)
        params["girth"] = _finite(census.girth)
    else:
        out = ekar_pipeline(H, a.alpha, d_max=a.dmax, seed=a.seed, kind=a.objective)
        rho = out.rho
        params.update(d_max=out.d_max, seed=a.seed, objective=a.objective)
        extra = {"ekar": out.summary()}
    save_rho(a.out, rho, a.method, params, H, extra)
    print(f"wrote {a.out}: method={a.method} min={rho.min():.4f} mean={rho.mean():.4f}")
    return EXIT_OK


def cmd_simulate(a) -> int:
    cfg = IddConfig.from_file(a.config)
    out = a.out or cfg.output
    if not out:
        raise ConfigError("no output path: pass --out or set 'output' in the config")

    def progress(p):
        print(f"snr={p.snr_db:.2f} dB blocks={p.blocks} ber={p.ber:.3e} fer={p.fer:.3e}",
              file=sys.stderr)

    res = monte_carlo(cfg, progress=progress)
    write_results(res, out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_exit_chart(a) -> int:
    grid = default_grid(a.points)
    if a.component == "decoder":
        if a.alist:
            H = _load(a.alist)
        else:
            H = load_code(IddConfig())
        rho = load_rho(a.rho_file, H) if a.rho_file else 1.0
        curve = exit_decoder_curve(H, rho, a.inner, grid, a.bits, a.seed)
    else:
        curve = exit_detector_curve(a.k, a.nr, a.ebn0, a.rate, a.scenario, grid=grid,
                                    min_bits=a.bits, seed=a.seed)
    text = curve.to_csv()
    if a.out:
        Path(a.out).write_text(text)
        print(f"wrote {a.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kaidd", description="LDPC-coded multiuser MIMO iterative detection and "
                "decoding with reweighted belief propagation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build-code", help="construct a regular PEG code and write an alist file")
    b.add_argument("--n", type=int, default=1000, help="block length N")
    b.add_argument("--m", type=int, default=500, help="number of checks M")
    b.add_argument("--dv", type=int, default=3, help="variable-node degree")
    b.add_argument("--seed", type=int, default=None,
                   help="tie-break seed (default: deterministic lowest-index)")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_code)

    an = sub.add_parser("analyze", help="girth, cycle census and subgraph expansion")
    an.add_argument("--alist", required=True)
    an.add_argument("--cycles", action="store_true", help="per-check short-cycle counts")
    an.add_argument("--expand", action="store_true", help="subgraph expansion")
    an.add_argument("--dmax", type=int, default=None, help="expansion depth (default: swept)")
    an.add_argument("--out", default=None, help="JSON output (default: stdout)")
    an.set_defaults(func=cmd_analyze)

    o = sub.add_parser("optimize-faps", help="compute a reweighting vector")
    o.add_argument("--alist", required=True)
    o.add_argument("--method", choices=("ckar", "ekar", "urw"), required=True)
    o.add_argument("--alpha", type=float, default=0.85)
    o.add_argument("--dmax", type=int, default=None, help="EKAR expansion depth (default: swept)")
    o.add_argument("--objective", choices=("linear", "bound"), default="bound",
                   help="EKAR subgraph objective")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("simulate", help="Monte Carlo BER/FER sweep from a config file")
    s.add_argument("--config", required=True, help="flat key = value configuration file")
    s.add_argument("--out", default=None, help="CSV path (JSON provenance written alongside)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("exit-chart", help="EXIT transfer curve as two-column CSV")
    e.add_argument("--component", choices=("decoder", "detector"), required=True)
    e.add_argument("--ebn0", type=float, default=4.0, help="Eb/N0 in dB (detector)")
    e.add_argument("--alist", default=None, help="code (decoder; default: PEG N=1000)")
    e.add_argument("--rho-file", default=None, help="reweighting vector JSON (decoder)")
    e.add_argument("--inner", type=int, default=30, help="decoder iterations")
    e.add_argument("--k", type=int, default=4)
    e.add_argument("--nr", type=int, default=4)
    e.add_argument("--rate", type=float, default=0.5)
    e.add_argument("--scenario", type=int, choices=(1, 2), default=1)
    e.add_argument("--points", type=int, default=11, help="grid size on [0, 1]")
    e.add_argument("--bits", type=int, default=100_000, help="minimum bits per grid point")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_exit_chart)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, FapConfigError, CodeConstructionError) as exc:
        print(f"kaidd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 3
        print(f"kaidd: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
