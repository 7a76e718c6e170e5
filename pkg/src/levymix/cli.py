"""Command-line front end.

    levymix <command> [--config FILE] [--set key.path=value ...] [--out DIR] [--workers N]

Every command writes CSV tables (header row, ``repr`` floats) and one JSON
record carrying ``tool_version`` and ``config_hash``. Exit status is 0 on
success, 2 on invalid input (unknown built-in, failed assumptions, bad
domain) and 3 on numerical failure.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__, certify, config, diffusion, mixing, operators, sampler, transforms
from .errors import AssumptionError, HorizonError, LevymixError, NumericError

log = logging.getLogger("levymix")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


class Run:
    """Output directory plus the provenance fields stamped on every JSON file."""

    def __init__(self, doc, out_dir):
        self.doc = doc
        self.out = out_dir
        self.hash = config.config_hash(doc)
        os.makedirs(out_dir, exist_ok=True)
        self.written = []

    def path(self, name):
        p = os.path.join(self.out, name)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        self.written.append(p)
        return p

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")

    def json(self, name, record):
        body = {"tool_version": __version__, "config_hash": self.hash, **record}
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(_jsonable(body), fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _floats(values, what):
    arr = np.atleast_1d(np.asarray(values, float))
    if arr.ndim != 1 or arr.size == 0:
        raise config.ConfigError(f"{what} must be a non-empty list of numbers")
    return arr


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_exponent(doc, run):
    sec = config.section(doc, "exponent", {"lambda": [0.5, 1.0, 2.0, 4.0], "s": [0.1, 1.0, 10.0]})
    mixed = config.build_mixed(doc, strict=False)
    if not mixed.report.passed:
        run.json("exponent.json", {"assumptions": mixed.report.as_dict()})
        raise AssumptionError(f"assumptions violated: {mixed.report.as_dict()}", mixed.report)
    lam = _floats(sec["lambda"], "exponent.lambda")
    s = _floats(sec["s"], "exponent.s")
    run.csv("exponent.csv", ["lambda", "mixed_f"], zip(lam, mixing.mixed_f(mixed, lam)))
    run.csv("tail.csv", ["s", "mixed_tail"], zip(s, mixing.mixed_tail(mixed, s)))
    run.json("exponent.json", {
        "assumptions": mixed.report.as_dict(),
        "mixed_kill": mixed.mixed_kill,
        "mixed_drift": mixed.mixed_drift,
        "nodes": len(mixed.ys),
    })


def cmd_simulate(doc, run):
    sec = config.section(doc, "simulate", {
        "lambda": [1.0], "t": [1.0], "inverse_t": [], "path_grid": 101, "export_paths": 3,
    })
    mixed = config.build_mixed(doc)
    cfg = config.simulation_config(doc)
    records, rows = [], []
    for t in _floats(sec["t"], "simulate.t"):
        for lam in _floats(sec["lambda"], "simulate.lambda"):
            rec = sampler.estimate_record(mixed, lam, t, cfg)
            rec["exact"] = math.exp(-t * float(mixed.f(lam)))
            records.append(rec)
            rows.append((rec["lambda"], rec["t"], rec["estimate"], rec["se"], rec["exact"]))
    run.csv("laplace.csv", ["lambda", "t", "estimate", "se", "exact"], rows)
    inverse = []
    for t in np.atleast_1d(np.asarray(sec["inverse_t"], float)):
        L = sampler.sample_inverse_batch(mixed, t, cfg)
        U = float(transforms.renewal_function(mixed, [t], config.inversion_config(doc)).values[0])
        inverse.append((float(t), float(L.mean()), float(L.std(ddof=1) / math.sqrt(L.size)), U))
    if inverse:
        run.csv("inverse.csv", ["t", "mean_L", "se", "renewal"], inverse)
    grid = np.linspace(0.0, cfg.horizon, int(sec["path_grid"]))
    for i in range(int(sec["export_paths"])):
        path = sampler.sample_path(mixed, cfg, index=i)
        sampler.write_path_csv(path, grid, run.path(f"paths/path_{i:04d}.csv"))
    run.json("laplace.json", {"records": records, "inverse": [
        {"t": t, "mean_L": m, "se": se, "renewal": u} for t, m, se, u in inverse
    ]})


def cmd_invert(doc, run):
    sec = config.section(doc, "invert", {
        "mu_x": 1.0, "mu_t": [0.25, 0.5, 1.0, 2.0, 4.0],
        "l_t": 1.0, "l_x": [0.25, 0.5, 1.0, 2.0], "l_method": "convolution",
        "U_t": [0.5, 1.0, 2.0, 4.0],
    })
    mixed = config.build_mixed(doc)
    icfg = config.inversion_config(doc)
    grids = {}
    if sec["mu_t"]:
        grids["mu"] = transforms.subordinator_density(mixed, float(sec["mu_x"]), _floats(sec["mu_t"], "mu_t"), icfg)
    if sec["l_x"]:
        grids["l"] = transforms.inverse_density(
            mixed, _floats(sec["l_x"], "l_x"), float(sec["l_t"]), icfg, method=sec["l_method"]
        )
    if sec["U_t"]:
        grids["U"] = transforms.renewal_function(mixed, _floats(sec["U_t"], "U_t"), icfg)
    for name, g in grids.items():
        g.to_csv(run.path(f"{name}.csv"))
    run.json("invert.json", {name: g.metadata() for name, g in grids.items()})


_TEST_FUNCTIONS = {
    "exp": (lambda t: np.exp(-t), lambda lam: 1.0 / (lam + 1.0)),
    "texp": (lambda t: t * np.exp(-t), lambda lam: 1.0 / (lam + 1.0) ** 2),
}


def cmd_operator(doc, run):
    sec = config.section(doc, "operator", {"h": 1e-3, "lambda": [0.5, 1.0, 2.0, 5.0], "u": "exp"})
    mixed = config.build_mixed(doc)
    if sec["u"] not in _TEST_FUNCTIONS:
        raise config.ConfigError(f"operator.u must be one of {sorted(_TEST_FUNCTIONS)}")
    u, ut = _TEST_FUNCTIONS[sec["u"]]
    lam = _floats(sec["lambda"], "operator.lambda")
    h = float(sec["h"])
    length = -math.log(operators.TAIL_WEIGHT) / lam.min() * 1.05
    grid = operators.TimeGrid.covering(length, h)
    kernel = operators.build_kernel(mixed, grid)
    kernel.to_csv(run.path("kernel.csv"))
    residual = operators.symbol_check(u, mixed, lam, grid, u_laplace=ut, kernel=kernel)
    const = operators.apply_regularized(np.ones(grid.N + 1), kernel)
    run.json("operator.json", {
        "h": h, "N": grid.N, "lambda": lam, "u": sec["u"],
        "symbol_residual": residual,
        "constant_annihilation": float(np.nanmax(np.abs(const))),
    })


def cmd_diffuse(doc, run):
    sec = config.section(doc, "diffuse", {
        "r": [0.0, 0.5, 1.0, 1.5, 2.0, 3.0], "t": 1.0, "n": 1, "method": "quadrature",
        "msd_t": [1.0, 10.0, 100.0, 1000.0, 10000.0],
    })
    mixed = config.build_mixed(doc)
    icfg = config.inversion_config(doc)
    n = int(sec["n"])
    field = diffusion.fundamental_solution(mixed, _floats(sec["r"], "diffuse.r"), float(sec["t"]), n, icfg,
                                           method=sec["method"])
    field.to_csv(run.path("q.csv"))
    t_msd = _floats(sec["msd_t"], "diffuse.msd_t")
    curve = diffusion.msd(mixed, t_msd, n, icfg)
    curve.to_csv(run.path("msd.csv"))
    idx = diffusion.regular_variation_index(mixed)
    ratio = math.gamma(1.0 + idx.alpha) * curve.values[-1] / (2.0 * n) / curve.asymptote[-1]
    run.json("diffuse.json", {
        "alpha": idx.alpha,
        "alpha_spread": idx.spread,
        "alpha_indeterminate": idx.indeterminate,
        "diffusivity_limit": diffusion.diffusivity_limit(mixed),
        "t_max": float(t_msd[-1]),
        "msd_ratio_at_t_max": ratio,
        "q": {"t": field.t, "n": n, "method": sec["method"]},
    })


def cmd_certify(doc, run):
    sec = config.section(doc, "certify", {"kinds": ["CBF", "SBF", "TBF", "ME"], "order": 4,
                                          "grid": [1e-2, 1e2, 64]})
    mixed = config.build_mixed(doc, strict=False)
    lo, hi, pts = sec["grid"]
    grid = certify.log_grid(float(lo), float(hi), int(pts))
    out = {}
    for kind in sec["kinds"]:
        entry = {}
        try:
            entry["mixed"] = certify.certify_mixed(mixed, kind, grid, int(sec["order"])).as_dict()
            nodes = certify.node_reports(mixed, kind, grid, int(sec["order"]))
            entry["nodes_all_pass"] = all(r.passed for r in nodes)
            entry["node_verdicts"] = sorted({r.verdict for r in nodes})
        except LevymixError as exc:
            entry["unavailable"] = str(exc)
        out[kind] = entry
    run.json("certify.json", {"certificates": out, "assumptions": mixed.report.as_dict()})


def cmd_conjugate(doc, run):
    sec = config.section(doc, "conjugate", {"lambda": [0.1, 1.0, 10.0], "t": [0.5, 1.0, 2.0]})
    mixed = config.build_mixed(doc)
    icfg = config.inversion_config(doc)
    lam = _floats(sec["lambda"], "conjugate.lambda")
    t = _floats(sec["t"], "conjugate.t")
    fstar = mixing.mixed_f_star(mixed, lam)
    ilt = mixing.inverse_local_time_exponent(mixed, lam)
    run.csv("conjugate.csv", ["lambda", "mixed_f_star", "inverse_local_time_exponent"], zip(lam, fstar, ilt))
    pot = mixing.mixed_potential_measure(mixed, icfg)
    run.csv("potential.csv", ["t", "density"], zip(t, np.atleast_1d(pot.density(t))))
    run.json("conjugate.json", {"potential_atom": pot.atom})


COMMANDS = {
    "exponent": (cmd_exponent, "tabulate E f and the mixed tail"),
    "simulate": (cmd_simulate, "simulate paths and Monte-Carlo Laplace transforms"),
    "invert": (cmd_invert, "densities of sigma and L, renewal function"),
    "operator": (cmd_operator, "kernel weights and symbol residuals"),
    "diffuse": (cmd_diffuse, "fundamental solution, MSD, index and diffusivity limit"),
    "certify": (cmd_certify, "class certificates for nodes and mixture"),
    "conjugate": (cmd_conjugate, "conjugate exponents and potential measure"),
}


def build_parser():
    ap = argparse.ArgumentParser(prog="levymix", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"levymix {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", "-c", help="JSON configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config leaf by dotted path (value parsed as JSON)")
        p.add_argument("--out", "-o", help=f"output directory (default: ${config.ENV_OUTPUT_DIR} "
                                           f"or {config.DEFAULT_OUTPUT_DIR})")
        p.add_argument("--workers", type=int, help="worker threads for simulation (0: all CPUs)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = config.load(args.config) if args.config else {}
        doc = config.apply_overrides(doc, args.overrides)
        if args.workers is not None:
            doc.setdefault("numerics", {})["workers"] = args.workers
        config.numerics(doc)
        run = Run(doc, config.output_dir(doc, args.out))
        COMMANDS[args.command][0](doc, run)
    except (NumericError, HorizonError) as exc:
        print(f"levymix: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LevymixError, ValueError) as exc:
        print(f"levymix: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for p in run.written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
