"""Experiment runner for the worked examples and the decoder-gap study."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import distortion as dist
from . import kernels
from ._io import out_path, text_out
from .computations import computation_from_config, make_computation
from .decoders import excess_fmse_sweep
from .design import design_fmse_fixed_rate, design_mse_fixed_rate, design_uniform
from .errors import (
    DesignInfeasibleError,
    DFSQError,
    InvalidParameterError,
    TheoryUndefinedError,
)
from .quantizer import build_quantizer
from .sensitivity import min_exponential_sensitivity, univariate_sensitivity
from .sources import ProductSource, make_source, source_from_config, square_law

EXPERIMENTS = ("gaussian_square", "cauchy_exp", "multi_sum_square", "multi_min", "decoder_gap",
               "custom")
DEFAULT_RATES = (2, 3, 4, 5, 6, 7, 8)
DEFAULT_N = {"multi_sum_square": 2, "multi_min": 10}
SAMPLES_NOTE = "default sample count 1e6 keeps standard errors below plotting resolution"


@dataclass
class ExperimentConfig:
    experiment: str
    rate_grid: tuple = DEFAULT_RATES
    samples: int = 1_000_000
    seed: int = 0
    N: int | None = None
    output_path: str | None = None
    source: dict | None = None
    computation: dict | None = None
    halfwidth_grid: tuple | None = None
    search_samples: int = 200_000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidParameterError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        self.rate_grid = tuple(float(r) for r in self.rate_grid)
        if not self.rate_grid or any(b <= a for a, b in zip(self.rate_grid, self.rate_grid[1:])):
            raise InvalidParameterError("rate grid must be non-empty and increasing")
        if self.samples < 10_000 or self.search_samples < 10_000:
            raise InvalidParameterError("sample counts must be at least 1e4")
        if self.N is None:
            self.N = DEFAULT_N.get(self.experiment, 1)
        if self.N < 1:
            raise InvalidParameterError("N must be >= 1")
        if self.experiment == "custom" and (self.source is None or self.computation is None):
            raise InvalidParameterError("custom experiments need source and computation records")

    @classmethod
    def from_dict(cls, record: dict) -> ExperimentConfig:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(record) - known
        if extra:
            raise InvalidParameterError(f"unknown config keys: {sorted(extra)}")
        return cls(**record)

    @classmethod
    def from_file(cls, path) -> ExperimentConfig:
        text = Path(path).read_text()
        if str(path).endswith((".yaml", ".yml")):
            import yaml

            record = yaml.safe_load(text)
        else:
            record = json.loads(text)
        return cls.from_dict(record)


@dataclass
class ExampleResult:
    config: ExperimentConfig
    rows: list
    notes: list = field(default_factory=list)
    sweep: object = None

    def summary(self) -> str:
        return summary_table(self.rows, self.notes)


def rate_to_K(rate: float) -> int:
    return max(3, int(round(2.0 ** rate)))


def default_halfwidth_grid(src, one_sided=False, points=48):
    """Geometric grid of granular half-widths spanning the bulk and the tails."""
    lo_q = float(src.inv_cdf(0.75 if not one_sided else 0.5))
    hi_q = float(src.inv_cdf(1 - 1e-7))
    base = max(abs(lo_q - (0 if one_sided else src.median)), 1e-3 * src.scale)
    top = max(abs(hi_q - (0 if one_sided else src.median)), 2 * base)
    return tuple(np.geomspace(base, top, points))


def _uniform_for(src, w):
    lo, hi = src.support
    if math.isfinite(lo) and not math.isfinite(hi):
        return design_uniform((lo, lo + w))
    if math.isfinite(lo) and math.isfinite(hi):
        mid = 0.5 * (lo + hi)
        return design_uniform((max(lo, mid - w), min(hi, mid + w)))
    return design_uniform((src.median - w, src.median + w))


def best_uniform_granular(src, g, rate, halfwidth_grid=None, samples=200_000, seed=0):
    """Brute-force search for the best uniform granular region at ``rate``.

    Two-sided supports use ``[m - w, m + w]`` around the median; one-sided
    supports ``[lo, lo + w]``.  Every candidate is scored on the same sample
    stream.  Returns ``(best_w, best_distortion, curve)`` where ``curve`` is a
    list of ``(w, d, stderr)``.
    """
    marginal = src.marginals[0] if isinstance(src, ProductSource) else src
    one_sided = math.isfinite(marginal.support[0])
    grid = np.asarray(halfwidth_grid if halfwidth_grid is not None
                      else default_halfwidth_grid(marginal, one_sided), dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise InvalidParameterError("halfwidth grid must be positive and increasing")
    K = rate_to_K(rate)
    N = src.N if isinstance(src, ProductSource) else 1
    curve = []
    for w in grid:
        q = build_quantizer(_uniform_for(marginal, w), K)
        r = dist.empirical_fmse(src, g, [q] * N, samples=samples, seed=seed)
        curve.append((float(w), r.d_empirical, r.stderr))
    i = int(np.argmin([c[1] for c in curve]))
    return curve[i][0], curve[i][1], curve


# -- experiment assembly ------------------------------------------------------


@dataclass
class _Setup:
    """Source, computation and per-design densities for one experiment."""

    src: object
    marginal: object
    g: object
    gamma: object
    designs: dict
    notes: list


def _context(config, exc):
    exc.args = (f"[{config.experiment}] {exc.args[0] if exc.args else exc}",) + exc.args[1:]
    return exc


def _univariate_setup(config, src, g, gamma):
    notes = []
    designs = {"functional": design_fmse_fixed_rate(src, gamma)}
    try:
        designs["ordinary"] = design_mse_fixed_rate(src)
    except DesignInfeasibleError as exc:
        notes.append(f"ordinary design skipped: {exc}")
    return _Setup(src, src, g, gamma, designs, notes)


def _setup(config: ExperimentConfig) -> _Setup:
    kind = config.experiment
    if kind == "gaussian_square":
        src = make_source("gaussian")
        g = make_computation("square")
        return _univariate_setup(config, src, g, univariate_sensitivity(g))
    if kind == "cauchy_exp":
        src = make_source("cauchy")
        g = make_computation("exp_neg_abs")
        return _univariate_setup(config, src, g, univariate_sensitivity(g))
    if kind == "decoder_gap":
        src = make_source("exponential")
        g = make_computation("one_minus_exp_neg")
        return _univariate_setup(config, src, g, univariate_sensitivity(g))
    if kind == "custom":
        src = source_from_config(config.source)
        g = computation_from_config(config.computation)
        if g.arity != 1:
            raise InvalidParameterError("custom experiments take a univariate computation")
        return _univariate_setup(config, src, g, univariate_sensitivity(g))
    N = config.N
    if kind == "multi_sum_square":
        marginal = make_source("gaussian")
        g = make_computation("separable_sum_of_squares", N)
        # separable: every partial is 2|x_n| regardless of the other sources
        gamma = univariate_sensitivity(make_computation("square"))
    else:
        marginal = make_source("exponential")
        g = make_computation("min_of_N", N)
        gamma = min_exponential_sensitivity(N, 1.0)
    setup = _univariate_setup(config, marginal, g, gamma)
    # a single source runs through the scalar path so results match the univariate examples
    setup.src = marginal if N == 1 else ProductSource.iid(marginal, N)
    return setup


def _theory(setup, density, K, N):
    try:
        if N == 1:
            return dist.theory_univariate_limit(setup.marginal, setup.gamma, density) / K ** 2
        lim = dist.theory_multivariate_limit([setup.marginal] * N, [setup.gamma] * N,
                                             [density] * N)
        return float(lim.distortion(N * K))
    except TheoryUndefinedError:
        return math.nan


def compute_first(src, g, rate, samples, seed):
    """Quantize ``Y = g(X)`` directly with the MSE-optimal quantizer for its law."""
    ylaw = square_law(src)
    K = rate_to_K(rate)
    q = build_quantizer(design_mse_fixed_rate(ylaw), K)
    s1 = s2 = 0.0
    n = 0
    for rng, count in dist.block_generators(seed, samples):
        y = g.eval(src.sample(rng, count))
        a, b = kernels.table_error_sums(y, q.boundaries, q.codewords, y)
        s1 += a
        s2 += b
        n += count
    mean = s1 / n
    se = math.sqrt(max(s2 / n - mean * mean, 0.0) / (n - 1))
    theory = dist.theory_fixed_rate_optimal(ylaw)(q.rate)
    return dist.DistortionReport(K, q.rate, mean, se, theory, seed, int(samples))


def _rate_rows(config, setup, rate):
    N = config.N
    K = rate_to_K(rate)
    tag = config.experiment
    rows = []
    kappa = N * K if N > 1 else None
    for name, density in setup.designs.items():
        q = build_quantizer(density, K)
        r = dist.empirical_fmse(setup.src, setup.g, [q] * N, samples=config.samples,
                                seed=config.seed, d_theory=_theory(setup, density, K, N),
                                experiment_id=f"{tag}:{name}")
        r.kappa = kappa
        rows.append(r)
    w, _, _ = best_uniform_granular(setup.src, setup.g, rate, config.halfwidth_grid,
                                    config.search_samples, config.seed)
    uni = _uniform_for(setup.marginal, w)
    q = build_quantizer(uni, K)
    r = dist.empirical_fmse(setup.src, setup.g, [q] * N, samples=config.samples,
                            seed=config.seed, d_theory=_theory(setup, uni, K, N),
                            experiment_id=f"{tag}:uniform")
    r.kappa = kappa
    r.extra["halfwidth"] = w
    rows.append(r)
    if tag == "gaussian_square":
        r = compute_first(setup.src, setup.g, rate, config.samples, config.seed)
        r.experiment_id = f"{tag}:compute_first"
        rows.append(r)
    return rows


def _sort_key(row):
    return (row.experiment_id, row.rate)


def run_example(config: ExperimentConfig, workers: int = 1) -> ExampleResult:
    """Simulate every design of ``config.experiment`` across the rate grid.

    Rate points are independent (each uses the configured seed, so designs at
    one rate share random numbers) and may run on ``workers`` threads; rows
    are sorted by ``(design, rate)`` so output never depends on scheduling.
    """
    try:
        setup = _setup(config)
        if config.experiment == "decoder_gap":
            return _run_decoder_gap(config, setup)
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(lambda r: _rate_rows(config, setup, r), config.rate_grid))
        else:
            parts = [_rate_rows(config, setup, r) for r in config.rate_grid]
    except DFSQError as exc:
        raise _context(config, exc)
    rows = sorted((r for part in parts for r in part), key=_sort_key)
    notes = list(setup.notes) + [SAMPLES_NOTE]
    return ExampleResult(config, rows, notes)


def _run_decoder_gap(config, setup):
    density = setup.designs["functional"]
    sweep = excess_fmse_sweep(setup.src, setup.g, density, config.rate_grid,
                              samples=config.samples, seed=config.seed)
    rows = []
    for i, R in enumerate(sweep.rates):
        K = int(sweep.K[i])
        theory = _theory(setup, density, K, 1)
        for kind in ("simple", "mmse", "fmmse"):
            rows.append(dist.DistortionReport(
                K, math.log2(K), float(sweep.d[kind][i]), float(sweep.se[kind][i]), theory,
                config.seed, config.samples, experiment_id=f"decoder_gap:{kind}"))
    rows.sort(key=_sort_key)
    notes = [f"log relative excess slope {sweep.slope:.4g} per bit, R^2 {sweep.r_squared:.4g}",
             SAMPLES_NOTE]
    return ExampleResult(config, rows, notes, sweep)


# -- reporting ----------------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(rows, path):
    """CSV of report rows, sorted by ``(design, rate)``."""
    with text_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dist.CSV_COLUMNS)
        for r in sorted(rows, key=_sort_key):
            rec = r.row()
            w.writerow([_cell(rec[c]) for c in dist.CSV_COLUMNS])
    return out_path(path)


def summary_table(rows, notes=()) -> str:
    """Scaled distortions ``2^{2R} D`` per design and rate, theory in brackets."""
    designs = sorted({r.experiment_id for r in rows})
    rates = sorted({r.rate for r in rows})
    cell = {(r.experiment_id, r.rate): r for r in rows}
    width = max([len(d) for d in designs] + [16]) + 2
    lines = ["scaled distortion 2^(2R) * D  (theory in brackets)"]
    lines.append("R".rjust(6) + "".join(d.rjust(width) for d in designs))
    for R in rates:
        parts = [f"{R:6.3g}"]
        for d in designs:
            r = cell.get((d, R))
            if r is None:
                parts.append("-".rjust(width))
                continue
            th = "" if math.isnan(r.d_theory) else f" [{r.scaled_theory:.4g}]"
            parts.append(f"{r.scaled_empirical:.4g}{th}".rjust(width))
        lines.append("".join(parts))
    lines.extend(f"note: {n}" for n in notes)
    return "\n".join(lines) + "\n"


def emit_report(rows, path, notes=(), sweep=None):
    """Write the row CSV at ``path`` and a summary next to it.

    Returns the list of files written.  An empty row list yields a header-only
    CSV.
    """
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    out = [write_rows(rows, path)]
    summary = path.with_suffix(".summary.txt")
    summary.write_text(summary_table(rows, notes))
    out.append(summary)
    if sweep is not None:
        out.append(sweep.to_csv(path.with_suffix(".sweep.csv")))
    return out
