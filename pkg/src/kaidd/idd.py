"""Iterative detection and decoding: block receiver, Monte Carlo sweeps,
configuration and result persistence.

A block carries one LDPC codeword per user over N/J consecutive channel
uses of a single flat-fading channel realization. A "frame" in the
statistics is one user codeword, so a block contributes K frames.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ScenarioParams, apply, build_rx_correlation, realize_channel
from .decoder import MSG_CLIP, ReweightedDecoder
from .detector import QPSK_ANTIGRAY, Constellation, detect, modulate
from .fap_optimization import ckar_assign, ekar_pipeline, load_rho, urw_assign
from .graph_analysis import average_connectivity, count_short_cycles
from .ldpc_code import (DegreeDistribution, GeneratorMatrix, ParityCheckMatrix, encode,
                        load_alist, peg_construct, syndrome)

DECODERS = ("bp", "urw", "ckar", "ekar")
CSV_HEADER = ("snr_db", "ber", "fer", "bits", "frames", "mean_inner_iters", "mean_outer_iters")
THREADS_ENV = "KAIDD_THREADS"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- SNR bookkeeping


def snr_to_noise_variance(snr_db: float, K: int, sx2: float = 1.0) -> float:
    """sigma_n^2 = K sx2 10^(-snr/10), SNR defined on the total transmit power."""
    return K * sx2 * 10.0 ** (-snr_db / 10.0)


def ebn0_to_snr(ebn0_db: float, rate: float, bits_per_symbol: int = 2) -> float:
    return ebn0_db + 10.0 * math.log10(rate * bits_per_symbol)


def snr_to_ebn0(snr_db: float, rate: float, bits_per_symbol: int = 2) -> float:
    return snr_db - 10.0 * math.log10(rate * bits_per_symbol)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion k/n."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


# ---------------------------------------------------------------- configuration


@dataclass
class IddConfig:
    K: int = 4
    NR: int = 4
    scenario: int = 1
    snr_db: tuple = (6.0,)
    snr_unit: str = "snr"             # "snr" or "ebn0"
    inner_iters: int = 30
    outer_iters: int = 3
    decoder: str = "bp"
    rho_file: str | None = None
    alpha: float = 0.85
    max_blocks: int = 1000
    stop_errors: int = 100            # frame errors (user codewords) per SNR point
    seed: int = 0
    warm_start: bool = False
    alist: str | None = None
    code_n: int = 1000
    code_m: int = 500
    code_dv: int = 3
    code_seed: int | None = None
    rx_correlation: float = 0.8
    shadow_db: float = 3.0
    path_loss_lo: float = 0.7
    path_loss_hi: float = 1.0
    output: str | None = None

    def validate(self) -> "IddConfig":
        if self.K < 1 or self.NR < 1:
            raise ConfigError("K and NR must be positive")
        if self.scenario not in (1, 2):
            raise ConfigError(f"scenario must be 1 or 2, got {self.scenario}")
        if self.snr_unit not in ("snr", "ebn0"):
            raise ConfigError("snr_unit must be 'snr' or 'ebn0'")
        if not self.snr_db:
            raise ConfigError("at least one SNR point is required")
        if self.inner_iters < 1 or self.outer_iters < 1:
            raise ConfigError("inner_iters and outer_iters must be >= 1")
        if self.max_blocks < 1 or self.stop_errors < 1:
            raise ConfigError("max_blocks and stop_errors must be >= 1")
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {DECODERS}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0.0 < self.path_loss_lo <= self.path_loss_hi:
            raise ConfigError("path loss range must satisfy 0 < lo <= hi")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["snr_db"] = list(self.snr_db)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def scenario_params(self) -> ScenarioParams:
        return ScenarioParams(path_loss_range=(self.path_loss_lo, self.path_loss_hi),
                              shadow_db=self.shadow_db, rx_correlation=self.rx_correlation)

    @classmethod
    def from_mapping(cls, values: dict) -> "IddConfig":
        fields = {f.name.lower(): f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            f = fields.get(key.strip().lower().replace("-", "_"))
            if f is None:
                raise ConfigError(f"unknown configuration key {key!r}")
            name = f.name
            if name in kwargs:
                raise ConfigError(f"duplicate configuration key {key!r}")
            try:
                kwargs[name] = _coerce(name, raw, f.default)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
        return cls(**kwargs).validate()

    @classmethod
    def from_file(cls, path) -> "IddConfig":
        """Read flat ``key = value`` lines (``#`` / ``;`` comments)."""
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string("[idd]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        return cls.from_mapping(dict(parser["idd"]))


def _coerce(name: str, raw, default):
    if not isinstance(raw, str):
        return tuple(raw) if name == "snr_db" else raw
    raw = raw.strip()
    if name == "snr_db":
        return tuple(float(x) for x in raw.replace(",", " ").split())
    if raw.lower() in ("none", "") and name in ("rho_file", "alist", "code_seed", "output"):
        return None
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")
    if isinstance(default, int) or name == "code_seed":
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


# ---------------------------------------------------------------- code and weights


def load_code(cfg: IddConfig) -> ParityCheckMatrix:
    if cfg.alist:
        return load_alist(cfg.alist)
    return peg_construct(cfg.code_n, cfg.code_m, cfg.code_dv, seed=cfg.code_seed)


def resolve_rho(H: ParityCheckMatrix, cfg: IddConfig) -> tuple[np.ndarray, dict]:
    """Weight vector for the configured decoder variant plus provenance."""
    if cfg.rho_file:
        return load_rho(cfg.rho_file, H), {"source": "file", "path": str(cfg.rho_file)}
    if cfg.decoder == "bp":
        return np.ones(H.M), {"source": "bp"}
    n_d = average_connectivity(DegreeDistribution.from_code(H))
    if cfg.decoder == "urw":
        return urw_assign(H.M, n_d, cfg.alpha), {"source": "urw", "n_d": n_d}
    if cfg.decoder == "ckar":
        census = count_short_cycles(H)
        return ckar_assign(census, n_d, cfg.alpha), {"source": "ckar", "n_d": n_d, "girth": census.girth}
    outcome = ekar_pipeline(H, cfg.alpha, seed=cfg.seed)
    return outcome.rho, {"source": "ekar", **outcome.summary()}


# ---------------------------------------------------------------- one block


@dataclass
class BlockResult:
    decisions: np.ndarray     # (outer, K, N) hard decisions after each outer pass
    inner_iters: np.ndarray   # (outer, K) decoder iterations (0 once stopped)
    outer_used: int
    converged: np.ndarray     # (K,) zero syndrome at the end


def run_idd_block(r, C, noise_var: float, decoder: ReweightedDecoder, outer_iters: int,
                  inner_iters: int, const: Constellation = QPSK_ANTIGRAY,
                  warm_start: bool = False) -> BlockResult:
    """Exchange extrinsic LLRs between the MMSE-PIC detector and the decoder.

    ``r`` is (T, N_R) with T = N / J. The detector's priors are the decoder
    extrinsics of the previous pass (zero on the first). The loop stops
    after ``outer_iters`` passes or once every user's syndrome is zero;
    decisions of skipped passes repeat the last ones.
    """
    H = decoder.H
    r = np.asarray(r)
    C = np.asarray(C)
    J = const.bits_per_symbol
    T = H.N // J
    K = C.shape[1]
    if H.N % J or r.shape != (T, C.shape[0]):
        raise ValueError(f"received block shape {r.shape} does not match {(T, C.shape[0])}")
    prior = np.zeros((T, K, J))
    decisions = np.zeros((outer_iters, K, H.N), dtype=np.uint8)
    iters = np.zeros((outer_iters, K), dtype=np.int64)
    lam = [None] * K
    converged = np.zeros(K, dtype=bool)
    used = 0
    for o in range(outer_iters):
        used = o + 1
        det = detect(r, C, noise_var, prior, const)
        l1 = det.extrinsic.transpose(1, 0, 2).reshape(K, H.N)
        l2 = np.empty((K, H.N))
        for k in range(K):
            init = lam[k] if warm_start else None
            it, ok, _, lam_k, b = decoder.run(l1[k], inner_iters, lam_init=init)
            lam[k] = lam_k
            iters[o, k] = it
            converged[k] = ok
            decisions[o, k] = b < 0
            l2[k] = np.clip(b - l1[k], -MSG_CLIP, MSG_CLIP)
        prior = l2.reshape(K, T, J).transpose(1, 0, 2)
        if converged.all():
            decisions[o + 1:] = decisions[o]
            break
    return BlockResult(decisions, iters, used, converged)


# ---------------------------------------------------------------- Monte Carlo


@dataclass
class SnrPoint:
    snr_db: float
    ebn0_db: float
    noise_var: float
    blocks: int = 0
    frames: int = 0
    bits: int = 0
    bit_errors: list = field(default_factory=list)     # per outer iteration
    frame_errors: list = field(default_factory=list)   # per outer iteration
    inner_iters: int = 0
    decodes: int = 0
    outer_iters: int = 0

    @property
    def ber(self) -> float:
        return self.ber_at(-1)

    @property
    def fer(self) -> float:
        return self.fer_at(-1)

    def ber_at(self, outer: int) -> float:
        """BER after outer pass ``outer`` (1-based; -1 = last)."""
        k = outer - 1 if outer > 0 else outer
        return self.bit_errors[k] / self.bits if self.bits else 0.0

    def fer_at(self, outer: int) -> float:
        k = outer - 1 if outer > 0 else outer
        return self.frame_errors[k] / self.frames if self.frames else 0.0

    @property
    def mean_inner_iters(self) -> float:
        return self.inner_iters / self.decodes if self.decodes else 0.0

    @property
    def mean_outer_iters(self) -> float:
        return self.outer_iters / self.blocks if self.blocks else 0.0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.update(ber=self.ber, fer=self.fer, mean_inner_iters=self.mean_inner_iters,
                 mean_outer_iters=self.mean_outer_iters)
        return d


@dataclass
class SimResult:
    points: list
    config: dict
    config_hash: str
    code_digest: str
    rho_info: dict
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "config": self.config,
            "config_hash": self.config_hash,
            "code_digest": self.code_digest,
            "rho": self.rho_info,
            "snr_definition": "SNR = 10 log10(K sx2 / noise_var), sx2 = 1",
            "frame_unit": "one user codeword",
            "wall_clock_s": self.wall_clock,
            "points": [p.to_dict() for p in self.points],
        }


@dataclass
class _Context:
    H: ParityCheckMatrix
    gen: GeneratorMatrix
    decoder: ReweightedDecoder
    cfg: IddConfig
    params: ScenarioParams
    corr: object


def _block_rng(seed: int, snr_index: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, snr_index, block]))


def simulate_block(ctx: _Context, noise_var: float, rng: np.random.Generator):
    """Draw, transmit and receive one block. Returns ``(BlockResult, info bits)``."""
    cfg, gen = ctx.cfg, ctx.gen
    msg = rng.integers(0, 2, size=(cfg.K, gen.K), dtype=np.uint8)
    cw = encode(gen, msg)
    x = modulate(cw).T                                             # (T, K)
    chan = realize_channel(cfg.scenario, cfg.K, cfg.NR, rng, ctx.params, noise_var, ctx.corr)
    r = apply(chan.C, x, noise_var, rng)
    res = run_idd_block(r, chan.C, noise_var, ctx.decoder, cfg.outer_iters, cfg.inner_iters,
                        warm_start=cfg.warm_start)
    return res, cw


def _block_counts(ctx: _Context, res: BlockResult, cw: np.ndarray):
    info = ctx.gen.info_positions
    errs = res.decisions[:, :, info] != cw[None, :, info]          # (outer, K, K_info)
    bit_err = errs.sum(axis=(1, 2))
    frame_err = errs.any(axis=2).sum(axis=1)
    return bit_err, frame_err


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def monte_carlo(cfg: IddConfig, H: ParityCheckMatrix | None = None, rho=None,
                rho_info: dict | None = None, progress=None, on_block=None) -> SimResult:
    """BER/FER sweep over the configured SNR points.

    Block b of SNR point s draws all its randomness from
    SeedSequence([seed, s, b]); blocks are reduced in index order, so the
    result does not depend on the thread count. ``on_block(s, b, bit_err,
    frame_err)`` receives the per-outer-pass counts of every counted block
    in that order (runs with the same seed are therefore paired).
    """
    cfg.validate()
    t0 = time.perf_counter()
    H = load_code(cfg) if H is None else H
    if rho is None:
        rho, rho_info = resolve_rho(H, cfg)
    gen = GeneratorMatrix.from_parity_check(H)
    J = QPSK_ANTIGRAY.bits_per_symbol
    if H.N % J:
        raise ConfigError(f"code length {H.N} is not a multiple of {J}")
    corr = build_rx_correlation(cfg.rx_correlation, cfg.NR) if cfg.scenario == 2 else None
    ctx = _Context(H, gen, ReweightedDecoder(H, rho), cfg, cfg.scenario_params(), corr)
    rate = gen.K / gen.N
    n_threads = thread_count()
    points = []
    for s, value in enumerate(cfg.snr_db):
        if cfg.snr_unit == "ebn0":
            snr, ebn0 = ebn0_to_snr(value, rate, J), float(value)
        else:
            snr, ebn0 = float(value), snr_to_ebn0(value, rate, J)
        nv = snr_to_noise_variance(snr, cfg.K)
        pt = SnrPoint(snr, ebn0, nv, bit_errors=[0] * cfg.outer_iters,
                      frame_errors=[0] * cfg.outer_iters)

        def one(b, nv=nv, s=s):
            res, cw = simulate_block(ctx, nv, _block_rng(cfg.seed, s, b))
            return res, cw

        batch = max(1, 4 * n_threads) if n_threads > 1 else 1
        b = 0
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            while b < cfg.max_blocks and pt.frame_errors[-1] < cfg.stop_errors:
                ids = range(b, min(b + batch, cfg.max_blocks))
                outs = list(pool.map(one, ids)) if n_threads > 1 else [one(i) for i in ids]
                for blk, (res, cw) in zip(ids, outs):
                    if pt.frame_errors[-1] >= cfg.stop_errors:
                        break
                    be, fe = _block_counts(ctx, res, cw)
                    if on_block is not None:
                        on_block(s, blk, be, fe)
                    for o in range(cfg.outer_iters):
                        pt.bit_errors[o] += int(be[o])
                        pt.frame_errors[o] += int(fe[o])
                    pt.blocks += 1
                    pt.frames += cfg.K
                    pt.bits += cfg.K * gen.K
                    used = res.inner_iters[:res.outer_used]
                    pt.inner_iters += int(used.sum())
                    pt.decodes += used.size
                    pt.outer_iters += res.outer_used
                b = ids.stop
        points.append(pt)
        if progress is not None:
            progress(pt)
    return SimResult(points, cfg.to_dict(), cfg.digest(), H.digest(), rho_info or {},
                     time.perf_counter() - t0)


# ---------------------------------------------------------------- persistence


def _fmt(x) -> str:
    return str(x) if isinstance(x, (int, np.integer)) else f"{float(x):.10g}"


def format_csv(result: SimResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in result.points:
        w.writerow([_fmt(p.snr_db), _fmt(p.ber), _fmt(p.fer), _fmt(p.bits), _fmt(p.frames),
                    _fmt(p.mean_inner_iters), _fmt(p.mean_outer_iters)])
    return buf.getvalue()


def write_results(result: SimResult, csv_path, json_path=None) -> None:
    csv_path = Path(csv_path)
    csv_path.write_text(format_csv(result))
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    json_path.write_text(json.dumps(result.to_dict(), indent=1, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def verify_decisions(H: ParityCheckMatrix, res: BlockResult) -> bool:
    """True if every user flagged converged has a zero syndrome."""
    final = res.decisions[res.outer_used - 1]
    return all(not syndrome(H, final[k]).any() for k in np.flatnonzero(res.converged))
