"""Command-line driver.

Every subcommand reads one TOML config (see :mod:`svolterra.config`), writes
its artifacts under the output directory and exits 0 only when all enabled
assertions pass.  Each file starts with ``#`` header lines carrying the
package version and the full effective config.

Outputs
-------
resolvent              ``resolvent.csv``: ``t, s_1 .. s_N``
resolvent-convergence  ``resolvent_convergence.csv``: ``dt, residual, oracle_error``
simulate               ``paths/path_<i>.csv``: ``t, x_1 .. x_N``;
                       ``moments.csv``: ``t, mean_k, var_k, cov_j_k``
verify                 ``verify_report.json``
estimate               ``estimate.csv``: ``config, quantity, lhs, rhs, se, pass``
noise-dump             ``noise.csv``: ``path, step, dW_1 .. dW_N``
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_solution_chain
from .config import ConfigError, RunConfig, build_objects, build_space, load_config, parse_config  # noqa: F401
from .convolution import ConstantB, convolve_increments
from .estimates import mc_pass, moment_bound_check, square_trajectory_check, tail_bound_check, tail_grid
from .grid import TimeGrid
from .kernels import kernel_from_spec
from .montecarlo import map_batches, ordered_sum
from .noise import sample_increments
from .resolvent import build_family, convergence_sweep
from .spectral import HilbertSchmidtOperator

OUTPUT_ENV = "SVOLTERRA_OUTPUT_DIR"
SUBCOMMANDS = ("resolvent", "resolvent-convergence", "simulate", "verify", "estimate", "noise-dump")

MATRIX_KERNELS = {
    "constant": {"type": "constant"},
    "linear": {"type": "linear"},
    "fractional": {"type": "fractional", "alpha": 0.5},
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    return "%.17g" % v


class Writer:
    """Single-owner writer of all artifacts of one run."""

    def __init__(self, config: RunConfig, out_dir: Path):
        self.config = config
        self.out_dir = out_dir
        self.written: list[Path] = []

    def _header(self) -> str:
        return f"# svolterra {__version__}\n# config {self.config.to_json()}\n"

    def _open(self, name):
        path = self.out_dir / name
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fh = open(path, "w", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        self.written.append(path)
        return fh

    def csv(self, name, columns, rows):
        with self._open(name) as fh:
            fh.write(self._header())
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")

    def report(self, name, payload: dict):
        body = {"version": __version__, "config": self.config.effective(), **payload}
        with self._open(name) as fh:
            fh.write(self._header())
            fh.write(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _mode_cols(prefix, n):
    return [f"{prefix}_{k}" for k in range(1, n + 1)]


def cmd_resolvent(config, w: Writer):
    obj = build_objects(config)
    fam = build_family(obj.kernel, obj.space, obj.grid, workers=config.run["workers"])
    w.csv("resolvent.csv", ["t"] + _mode_cols("s", fam.n_modes),
          ([t] + list(row) for t, row in zip(obj.grid.times, fam.s.T)))
    ok = bool(np.all(fam.s[:, 0] == 1.0) and np.all(np.isfinite(fam.s)))
    return ok, [] if ok else ["resolvent is not finite or s(0) != 1"]


def cmd_resolvent_convergence(config, w: Writer):
    obj = build_objects(config)
    dts = config.resolvent_convergence["dts"] or [config.grid["dt"] * f for f in (8, 4, 2, 1)]
    rows = convergence_sweep(obj.kernel, obj.space, config.grid["T"], dts)
    w.csv("resolvent_convergence.csv", ["dt", "residual", "oracle_error"], rows)
    bad = [f"dt={r[0]:g}: non-finite residual" for r in rows if not math.isfinite(r[1])]
    return not bad, bad


def cmd_simulate(config, w: Writer):
    obj = build_objects(config)
    fam = build_family(obj.kernel, obj.space, obj.grid, workers=config.run["workers"])
    n_modes = fam.n_modes
    pairs = [(int(a), int(b)) for a, b in config.simulate["pairs"]]
    for a, b in pairs:
        if not (1 <= a <= n_modes and 1 <= b <= n_modes):
            raise ConfigError(f"mode pair ({a}, {b}) out of range 1..{n_modes}", "simulate.pairs")
    seed, n_paths = config.seed, config.paths
    n_write = min(config.simulate["write_paths"], n_paths)
    base = fam.s * obj.x0[:, None]

    def batch(lo, hi):
        dW = sample_increments(obj.space, obj.grid, seed, range(lo, hi))
        x = base[None] + convolve_increments(fam, obj.psi, dW, method=config.run["method"])
        keep = x[: max(0, min(hi, n_write) - lo)]
        cross = np.stack([(x[:, a - 1] * x[:, b - 1]).sum(axis=0) for a, b in pairs]) if pairs else None
        return {"sum": x.sum(axis=0), "sq": (x**2).sum(axis=0), "cross": cross, "keep": keep}

    parts = map_batches(batch, n_paths, config.run["batch_size"], config.run["workers"])
    mean = ordered_sum([p["sum"] for p in parts]) / n_paths
    denom = max(n_paths - 1, 1)
    var = (ordered_sum([p["sq"] for p in parts]) - n_paths * mean**2) / denom
    cov = []
    if pairs:
        cross = ordered_sum([p["cross"] for p in parts])
        cov = [(cross[i] - n_paths * mean[a - 1] * mean[b - 1]) / denom for i, (a, b) in enumerate(pairs)]
    kept = np.concatenate([p["keep"] for p in parts]) if n_write else np.zeros((0,))
    for i in range(n_write):
        w.csv(f"paths/path_{i:05d}.csv", ["t"] + _mode_cols("x", n_modes),
              ([t] + list(row) for t, row in zip(obj.grid.times, kept[i].T)))
    cols = ["t"] + _mode_cols("mean", n_modes) + _mode_cols("var", n_modes) + [f"cov_{a}_{b}" for a, b in pairs]
    rows = ([t] + list(mean[:, n]) + list(var[:, n]) + [c[n] for c in cov] for n, t in enumerate(obj.grid.times))
    w.csv("moments.csv", cols, rows)
    ok = bool(np.all(np.isfinite(mean)) and np.all(np.isfinite(var)))
    return ok, [] if ok else ["non-finite moments"]


def _select_checks(report: dict, check: str) -> dict:
    if check == "chain":
        return report["checks"]
    return {k: v for k, v in report["checks"].items() if k == check or k == f"{check}_convergence"}


def cmd_verify(config, w: Writer):
    obj = build_objects(config)
    v = config.verify
    report = run_solution_chain(obj.kernel, obj.space, obj.grid, obj.psi, obj.x0, None, v["paths"], config.seed,
                                v["tolerance"], v["dt_sweep"] or None, v["min_factor"])
    checks = _select_checks(report, v["check"])
    failed = [k for k, c in checks.items() if not c["pass"]]
    report = dict(report, check=v["check"], checks=checks, failed=failed, **{"pass": not failed})
    w.report("verify_report.json", report)
    return not failed, [f"check {k} failed" for k in failed]


def _estimate_rows(name, fam, psi, config):
    e = config.estimate
    T = fam.grid.T
    t_tail = e["tail_t"] or T
    mc = {"batch_size": config.run["batch_size"], "workers": config.run["workers"], "method": config.run["method"]}
    st = mc_pass(fam, psi, config.paths, config.seed, tail_t=t_tail, **mc)
    rep = moment_bound_check(fam, psi, config.paths, config.seed, C=e["C"], ratio_cap=e["ratio_cap"], stats_=st)
    rows = [(name, "moment_sup_mean_norm", rep.sup_estimate, rep.rhs, rep.sup_se, rep.holds_with_C),
            (name, "moment_observed_ratio", rep.observed_ratio, rep.ratio_cap,
             rep.sup_se / (rep.M_T * rep.psi_norm_mean_root) if rep.M_T * rep.psi_norm_mean_root > 0 else 0.0,
             rep.passed)]
    for a, b in tail_grid(fam, psi, t_tail):
        r = tail_bound_check(fam, psi, a, b, config.paths, config.seed, t_tail, slack=e["slack"], stats_=st)
        se = math.sqrt(r["p_hat"] * (1 - r["p_hat"]) / r["n_paths"])
        rows.append((name, f"tail_a={a:.6g}_b={b:.6g}", r["wilson_high"], r["rhs"], se, r["pass"]))
    sq = square_trajectory_check(fam, psi, config.paths, config.seed, stats_=st)
    rows.append((name, "square_trajectory", sq["estimate"], sq["bound"], sq["se"], sq["pass"]))
    return rows


def cmd_estimate(config, w: Writer):
    e = config.estimate
    rows = []
    if e["config_matrix"]:
        grid = TimeGrid.from_horizon(config.grid["T"], config.grid["dt"])
        for kname in e["matrix_kernels"]:
            if kname not in MATRIX_KERNELS:
                raise ConfigError(f"unknown matrix kernel {kname!r}", "estimate.matrix_kernels")
            kernel = kernel_from_spec(MATRIX_KERNELS[kname])
            for n in e["matrix_modes"]:
                space = build_space(int(n), T=config.grid["T"])
                fam = build_family(kernel, space, grid, workers=config.run["workers"])
                psi = ConstantB(HilbertSchmidtOperator.identity(space.n_modes))
                rows += _estimate_rows(f"{kname}-N{n}", fam, psi, config)
    else:
        obj = build_objects(config)
        fam = build_family(obj.kernel, obj.space, obj.grid, workers=config.run["workers"])
        rows = _estimate_rows(config.kernel["type"], fam, obj.psi, config)
    w.csv("estimate.csv", ["config", "quantity", "lhs", "rhs", "se", "pass"], rows)
    failed = [f"{r[0]} {r[1]}" for r in rows if not r[5] and not r[1].startswith("moment_sup")]
    return not failed, failed


def cmd_noise_dump(config, w: Writer):
    obj = build_objects(config)
    n_paths = config.noise_dump["paths"]
    dW = sample_increments(obj.space, obj.grid, config.seed, range(n_paths))
    rows = ((p, j) + tuple(dW[p, :, j]) for p in range(n_paths) for j in range(obj.grid.n_steps))
    w.csv("noise.csv", ["path", "step"] + _mode_cols("dW", obj.space.n_modes), rows)
    return True, []


COMMANDS = {
    "resolvent": cmd_resolvent,
    "resolvent-convergence": cmd_resolvent_convergence,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "estimate": cmd_estimate,
    "noise-dump": cmd_noise_dump,
}


def output_dir(config: RunConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or config.output_dir)


def run(config: RunConfig, subcommand: str, out_dir=None):
    """Run one subcommand; returns ``(exit_status, failures, written_paths)``."""
    if subcommand not in COMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    w = Writer(config, Path(out_dir) if out_dir is not None else output_dir(config))
    ok, failures = COMMANDS[subcommand](config, w)
    return (0 if ok else 1), failures, w.written


def _parser():
    p = argparse.ArgumentParser(prog="svolterra", description="Stochastic Volterra equation simulator and checks.")
    p.add_argument("--version", action="version", version=f"svolterra {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", help="TOML run configuration")
        s.add_argument("--output-dir", help=f"output directory (overridden by ${OUTPUT_ENV})")
        s.add_argument("--workers", type=int, help="worker threads for path batches")
        if name in ("simulate", "verify", "estimate", "noise-dump"):
            s.add_argument("--paths", type=int, help="number of sample paths")
        if name == "verify":
            s.add_argument("--check", choices=["weak", "strong", "ito", "chain"])
            s.add_argument("--dt-sweep", help="comma-separated step sizes, e.g. 2**-7,2**-8,2**-9")
        if name == "estimate":
            s.add_argument("--config-matrix", action="store_true", help="run the default kernel x modes matrix")
    return p


def _parse_dt(text: str) -> float:
    text = text.strip()
    if text.startswith("2**"):
        return 2.0 ** float(text[3:])
    if text.startswith("2^"):
        return 2.0 ** float(text[2:])
    return float(text)


def apply_flags(config: RunConfig, args) -> RunConfig:
    over: dict = {}
    if args.output_dir:
        over["output_dir"] = args.output_dir
    if args.workers is not None:
        over["run"] = {"workers": args.workers}
    paths = getattr(args, "paths", None)
    if paths is not None:
        if args.command == "verify":
            over["verify"] = {"paths": paths}
        elif args.command == "noise-dump":
            over["noise_dump"] = {"paths": paths}
        else:
            over["paths"] = paths
    if getattr(args, "check", None):
        over.setdefault("verify", {})["check"] = args.check
    if getattr(args, "dt_sweep", None):
        over.setdefault("verify", {})["dt_sweep"] = [_parse_dt(t) for t in args.dt_sweep.split(",")]
    if getattr(args, "config_matrix", False):
        over["estimate"] = {"config_matrix": True}
    return config.with_overrides(**over) if over else config


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = apply_flags(load_config(args.config), args)
        status, failures, written = run(config, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(f"wrote {path}")
    if failures:
        print(f"{len(failures)} assertion(s) failed:", file=sys.stderr)
        for f in failures:
            print(f"  {f}", file=sys.stderr)
    return status


__all__ = ["main", "run", "parse_config", "apply_flags", "output_dir", "OUTPUT_ENV"]

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
