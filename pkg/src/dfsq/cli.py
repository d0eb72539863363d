"""Command-line entry point.

Every subcommand exits 0 on success.  Failures print a single JSON line on
stderr, ``{"error": <type>, "message": <text>, "exit_code": <n>}``, and exit
with a nonzero code: 2 for bad input, 3 for infeasible designs or undefined
theory, 4 for internal inconsistencies and 1 for anything else.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import distortion as dist
from . import errors, harness
from .computations import make_computation
from .design import (
    design_fmse_entropy_constrained,
    design_fmse_fixed_rate,
    design_mse_fixed_rate,
    design_uniform,
)
from .quantizer import build_quantizer
from .sensitivity import univariate_sensitivity
from .sources import make_source

EXIT_CODES = (
    (errors.InternalInconsistencyError, 4),
    (errors.DesignInfeasibleError, 3),
    (errors.TheoryUndefinedError, 3),
    (errors.DivergenceError, 3),
    (errors.DFSQError, 2),
    (ValueError, 2),
    (OSError, 2),
)
DESIGN_KINDS = ("functional", "ordinary", "entropy", "uniform")


class UsageError(errors.InvalidParameterError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parse_rates(text):
    try:
        return tuple(float(r) for r in str(text).replace(" ", "").split(",") if r)
    except ValueError:
        raise UsageError(f"--rates expects comma-separated numbers, got {text!r}") from None


def _parse_params(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        try:
            out[key] = float(value)
        except ValueError:
            raise UsageError(f"--param {key}: {value!r} is not a number") from None
    return out


def load_config(path) -> dict:
    """Key-value document (JSON, or YAML by extension) mirroring the CLI flags."""
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        record = yaml.safe_load(text)
    else:
        record = json.loads(text)
    if not isinstance(record, dict):
        raise UsageError(f"config {path} must hold a key-value mapping")
    return record


def _merged(args, config_keys):
    """Explicit flags win over config values, which win over defaults."""
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(cfg) - set(config_keys)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = dict(config_keys)
    out.update(cfg)
    for key in config_keys:
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    return out


def _add_common(p, rates=True):
    if rates:
        p.add_argument("--rates", type=_parse_rates, help="comma-separated rates in bits")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--config", help="JSON or YAML file with the same keys as the flags")


def _add_problem(p):
    p.add_argument("--source", help="uniform, gaussian, exponential or cauchy")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="source parameter")
    p.add_argument("--computation", help="univariate computation kind")
    p.add_argument("--kind", choices=DESIGN_KINDS, help="design rule")
    p.add_argument("--interval", type=float, nargs=2, metavar=("LO", "HI"),
                   help="interval for the uniform design")


PROBLEM_KEYS = {"source": "gaussian", "param": None, "computation": "square",
                "kind": "functional", "interval": None, "out": None}


def _build_density(opts):
    params = opts["param"]
    if isinstance(params, (list, tuple)):
        params = _parse_params(params)
    src = make_source(opts["source"], **(params or {}))
    kind = opts["kind"]
    if kind not in DESIGN_KINDS:
        raise UsageError(f"unknown design kind {kind!r}")
    g = make_computation(opts["computation"])
    gamma = univariate_sensitivity(g)
    if kind == "functional":
        density = design_fmse_fixed_rate(src, gamma)
    elif kind == "ordinary":
        density = design_mse_fixed_rate(src)
    elif kind == "entropy":
        density = design_fmse_entropy_constrained(gamma, src.support, src.median, src.scale)
    else:
        if opts["interval"] is None:
            raise UsageError("the uniform design needs --interval LO HI")
        density = design_uniform(tuple(opts["interval"]))
    return src, g, gamma, density


def _emit_text(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_design(args):
    opts = _merged(args, PROBLEM_KEYS)
    _, _, _, density = _build_density(opts)
    density.to_csv(opts["out"] or sys.stdout)
    return 0


def cmd_quantize(args):
    keys = dict(PROBLEM_KEYS, K=None, rate=None)
    opts = _merged(args, keys)
    _, _, _, density = _build_density(opts)
    if (opts["K"] is None) == (opts["rate"] is None):
        raise UsageError("give exactly one of --K or --rate")
    K = opts["K"] if opts["K"] is not None else harness.rate_to_K(opts["rate"])
    q = build_quantizer(density, K)
    q.to_csv(opts["out"] or sys.stdout)
    return 0


def cmd_simulate(args):
    keys = dict(PROBLEM_KEYS, rates=harness.DEFAULT_RATES, samples=1_000_000, seed=0)
    opts = _merged(args, keys)
    src, g, gamma, density = _build_density(opts)
    rows = []
    rates = opts["rates"]
    if isinstance(rates, str):
        rates = _parse_rates(rates)
    for R in rates:
        K = harness.rate_to_K(R)
        q = build_quantizer(density, K)
        try:
            theory = dist.theory_univariate_limit(src, gamma, density) / K ** 2
        except errors.TheoryUndefinedError:
            theory = float("nan")
        rows.append(dist.empirical_fmse(src, g, q, samples=int(opts["samples"]),
                                        seed=int(opts["seed"]), d_theory=theory,
                                        experiment_id=f"simulate:{opts['kind']}"))
    _write_rows(rows, opts["out"])
    return 0


def _write_rows(rows, out):
    harness.write_rows(rows, out or sys.stdout)


EXAMPLE_KEYS = {"experiment": None, "rates": None, "samples": None, "seed": None, "N": None,
                "out": None, "search_samples": None, "workers": 1, "source": None,
                "computation": None, "halfwidth_grid": None, "rate_grid": None,
                "output_path": None}


def _experiment_config(opts) -> harness.ExperimentConfig:
    record = {"experiment": opts["experiment"]}
    for flag, field_name in (("rate_grid", "rate_grid"), ("output_path", "output_path"),
                             ("rates", "rate_grid"), ("samples", "samples"), ("seed", "seed"),
                             ("N", "N"), ("out", "output_path"),
                             ("search_samples", "search_samples"), ("source", "source"),
                             ("computation", "computation"),
                             ("halfwidth_grid", "halfwidth_grid")):
        if opts.get(flag) is not None:
            record[field_name] = opts[flag]
    return harness.ExperimentConfig.from_dict(record)


def _run_experiment(opts):
    config = _experiment_config(opts)
    result = harness.run_example(config, workers=int(opts.get("workers") or 1))
    if config.output_path:
        harness.emit_report(result.rows, config.output_path, result.notes, result.sweep)
    sys.stdout.write(result.summary())
    return result


def cmd_example(args):
    opts = _merged(args, EXAMPLE_KEYS)
    if args.name is not None:
        opts["experiment"] = args.name
    if opts["experiment"] is None:
        raise UsageError("example needs a name or an experiment key in --config")
    _run_experiment(opts)
    return 0


def cmd_decoder_gap(args):
    opts = _merged(args, EXAMPLE_KEYS)
    opts["experiment"] = "decoder_gap"
    out = opts.pop("out")
    result = _run_experiment(opts)
    result.sweep.to_csv(out or sys.stdout)
    return 0


def cmd_allocate(args):
    opts = _merged(args, {"constants": None, "rate": None, "out": None})
    constants = opts["constants"]
    if isinstance(constants, str):
        constants = _parse_rates(constants)
    if constants is None or opts["rate"] is None:
        raise UsageError("allocate needs --constants and --rate")
    alloc = dist.allocate_rates(constants, float(opts["rate"]))
    lines = ["n,constant,rate_bits,alpha"]
    for n, (a, r, al) in enumerate(zip(constants, alloc.rates, alloc.alphas), start=1):
        lines.append(f"{n},{float(a)!r},{r!r},{al!r}")
    _emit_text("\n".join(lines) + "\n", opts["out"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dfsq", description="Functional scalar quantizer design and simulation")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("design", help="write a point density as x,lambda,compressor")
    _add_problem(p)
    _add_common(p, rates=False)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("quantize", help="write a quantizer as k,p_lo,p_hi,codeword")
    _add_problem(p)
    p.add_argument("--K", type=int, help="codebook size")
    p.add_argument("--rate", type=float, help="rate in bits, K = round(2^rate)")
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--config", help="JSON or YAML file with the same keys as the flags")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("simulate", help="Monte Carlo fMSE of one design across rates")
    _add_problem(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example", help="run a worked example")
    p.add_argument("name", nargs="?", choices=harness.EXPERIMENTS)
    _add_common(p)
    p.add_argument("--N", type=int, help="number of sources for multivariate examples")
    p.add_argument("--search-samples", dest="search_samples", type=int,
                   help="samples per candidate in the uniform granular search")
    p.add_argument("--workers", type=int, help="threads over rate points")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("decoder-gap", help="simple vs MMSE vs fMMSE decoder sweep")
    _add_common(p)
    p.set_defaults(func=cmd_decoder_gap)

    p = sub.add_parser("allocate", help="optimal rate allocation across sources")
    p.add_argument("--constants", type=_parse_rates, help="comma-separated per-source constants")
    p.add_argument("--rate", type=float, help="total rate in bits")
    p.add_argument("--out", help="output file (stdout if omitted)")
    p.add_argument("--config", help="JSON or YAML file with the same keys as the flags")
    p.set_defaults(func=cmd_allocate)
    return parser


def _exit_code(exc):
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except Exception as exc:
        code = _exit_code(exc)
        line = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        sys.stderr.write(json.dumps(line) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
