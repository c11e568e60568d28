"""Command line interface.

Every subcommand reads a JSON study config, runs one study, and writes into
the output directory: one or more CSV files with documented headers, a
``manifest.json`` (config echo, package/library versions, stage timings) and
a ``plot.gp`` gnuplot script referencing the CSVs by relative path.

Exit codes: 0 success, 1 validation failure (model symmetry or Hessian gap),
2 usage error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, fock
from ._kernels import BACKEND
from .errors import ConvergenceError, GapViolationError, ResourceLimitError, ValidationError
from .experiments import (
    ConfigError,
    StudyConfig,
    _lowest_eigs,
    resolve_model,
    run_convergence,
    run_ims,
    run_pipeline,
    run_residual,
    run_thermal,
    validate_assumptions,
    write_csv,
)
from .hartree import minimize_hartree
from .model import validate_model

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

PLOT_STANZAS = {
    "converge": """
set logscale xy
set xlabel 'N'
set ylabel 'absolute error'
set output 'converge.png'
plot 'converge.csv' using 1:(column('abs_err1')) with linespoints title 'L=1'
""",
    "residual": """
set logscale y
set xlabel 'N'
set ylabel 'normalized residual'
set output 'residual.png'
plot 'residual.csv' using 1:(column('ratio')) with points title 'r/sqrt(M/N)'
""",
    "ims": """
set logscale y
set xlabel 'M_loc'
set ylabel 'defect'
set output 'ims.png'
plot 'ims.csv' using 1:(column('max_defect_ratio')) with linespoints \\
     title 'sampled', 'ims.csv' using 1:(column('bound')) with lines \\
     title 'band bound'
""",
    "thermal": """
set logscale y
set xlabel 'N'
set ylabel 'free energy gap'
set output 'thermal.png'
plot 'thermal.csv' using 1:(column('gap')) with linespoints title 'gap', \\
     'thermal.csv' using 1:(column('gibbs_trace_dist')) with linespoints \\
     title 'Gibbs trace distance'
""",
    "nbody": """
set xlabel 'N'
set ylabel 'lambda_L(H_N) - N e_H'
set output 'nbody.png'
plot 'nbody.csv' using 1:(column('lam1_shifted')) with linespoints title 'L=1'
""",
    "bogoliubov": """
set xlabel 'mode'
set ylabel 'frequency'
set output 'bogoliubov.png'
plot 'bogoliubov.csv' using 1:2 with points title 'xi'
""",
    "hartree": """
set xlabel 'mode'
set ylabel '|u0|'
set output 'hartree.png'
plot 'hartree.csv' using 1:(sqrt(column('u0_re')**2 + column('u0_im')**2)) \\
     with impulses title 'condensate amplitude'
""",
    "validate": """
set xlabel 'N'
set ylabel 'lambda_min / N'
set output 'validate.png'
plot 'validate.csv' using 1:(column('lambda_min_over_N')) with linespoints \\
     title 'strong condensation margin'
""",
}


def _emit_plot_script(outdir: str, subcommand: str) -> str | None:
    stanza = PLOT_STANZAS.get(subcommand)
    if stanza is None:
        return None
    path = os.path.join(outdir, "plot.gp")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# gnuplot script; run from this directory\n")
        fh.write("set datafile separator ','\n")
        fh.write("set key autotitle columnhead\n")
        fh.write("set terminal pngcairo size 900,600\n")
        fh.write(stanza.lstrip("\n"))
    return "plot.gp"


def _write_manifest(outdir, subcommand, cfg: StudyConfig, args, timings, outputs):
    import scipy
    manifest = {
        "command": "bogobench " + subcommand,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "threads": args.threads,
        "kernel_backend": BACKEND,
        "versions": {
            "bogobench": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timings_seconds": timings,
        "outputs": outputs,
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_hartree(model, cfg, outdir):
    sol = minimize_hartree(model, restarts=cfg.hartree_restarts,
                           tol=cfg.hartree_tol, seed=cfg.seed)
    doc = {
        "model": model.name,
        "u0": [[float(np.real(x)), float(np.imag(x))] for x in sol.u0],
        "e_H": sol.e_H,
        "mu_H": sol.mu_H,
        "eta_H": sol.eta_H,
        "grad_norm": sol.grad_norm,
        "restart_agreement": sol.restart_agreement,
        "nonunique_warning": sol.nonunique_warning,
        "K1_hs_norm": float(np.linalg.norm(sol.K1)),
        "K2_hs_norm": float(np.linalg.norm(sol.K2)),
    }
    with open(os.path.join(outdir, "hartree.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    rows = [[i, float(np.real(x)), float(np.imag(x))]
            for i, x in enumerate(sol.u0)]
    write_csv(os.path.join(outdir, "hartree.csv"),
              ["mode", "u0_re", "u0_im"], rows)
    return ["hartree.json", "hartree.csv"], doc


def _cmd_bogoliubov(model, cfg, outdir):
    pipe = run_pipeline(model, cfg)
    rows = [[i + 1, x] for i, x in enumerate(pipe.spec.xi)]
    write_csv(os.path.join(outdir, "bogoliubov.csv"), ["mode", "xi"], rows)
    summary = {"E0": pipe.spec.E0, "eta_H": pipe.sol.eta_H,
               "e_H": pipe.sol.e_H, "mu_H": pipe.sol.mu_H}
    with open(os.path.join(outdir, "bogoliubov.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return ["bogoliubov.csv", "bogoliubov.json"], summary


def _cmd_nbody(model, cfg, outdir):
    pipe = run_pipeline(model, cfg)
    header = ["N"] + [f"lam{j}" for j in range(1, cfg.L + 1)] \
        + [f"lam{j}_shifted" for j in range(1, cfg.L + 1)]
    rows = []
    for n in cfg.N_list:
        hn = fock.assemble_HN(pipe.rotated, n, cfg.kappa)
        vals, _ = _lowest_eigs(hn, cfg.L, cfg)
        rows.append([n, *[float(v) for v in vals],
                     *[float(v - n * pipe.sol.e_H) for v in vals]])
    write_csv(os.path.join(outdir, "nbody.csv"), header, rows)
    return ["nbody.csv"], None


def _cmd_converge(model, cfg, outdir):
    report = run_convergence(model, cfg)
    write_csv(os.path.join(outdir, "converge.csv"),
              report.header(cfg.L), report.table())
    summary = {
        "e_H": report.e_H, "mu_H": report.mu_H, "eta_H": report.eta_H,
        "E0": report.E0, "xi": report.xi,
        "fitted_exponent": report.fitted_exponent,
    }
    with open(os.path.join(outdir, "converge.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return ["converge.csv", "converge.json"], summary


def _cmd_thermal(model, cfg, outdir):
    rows = run_thermal(model, cfg)
    header = ["N", "F_minus_NeH", "F_bogoliubov", "gap", "gibbs_trace_dist"]
    write_csv(os.path.join(outdir, "thermal.csv"), header,
              [[r[h] for h in header] for r in rows])
    return ["thermal.csv"], None


def _cmd_residual(model, cfg, outdir):
    rows = run_residual(model, cfg)
    header = ["N", "M_loc", "r", "ratio"]
    write_csv(os.path.join(outdir, "residual.csv"), header,
              [[r[h] for h in header] for r in rows])
    return ["residual.csv"], None


def _cmd_ims(model, cfg, outdir):
    rows = run_ims(model, cfg)
    header = ["M_loc", "max_defect_ratio", "bound", "passed"]
    write_csv(os.path.join(outdir, "ims.csv"), header,
              [[r[h] for h in header] for r in rows])
    if not all(r["passed"] for r in rows):
        raise ValidationError("IMS band bound violated; see ims.csv")
    return ["ims.csv"], None


def _cmd_validate(model, cfg, outdir):
    report = validate_assumptions(model, cfg)
    with open(os.path.join(outdir, "validate.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    rows = [[r["N"], r["lambda_min"], r["lambda_min_over_N"]]
            for r in report["strong_condensation"]]
    write_csv(os.path.join(outdir, "validate.csv"),
              ["N", "lambda_min", "lambda_min_over_N"], rows)
    if not report["model_validation_passed"] or report["eta_H"] <= 0:
        raise ValidationError(
            f"assumption validation failed: eta_H = {report['eta_H']:.6e}, "
            f"model_validation_passed = {report['model_validation_passed']}"
        )
    return ["validate.csv", "validate.json"], report


COMMANDS = {
    "hartree": _cmd_hartree,
    "bogoliubov": _cmd_bogoliubov,
    "nbody": _cmd_nbody,
    "converge": _cmd_converge,
    "thermal": _cmd_thermal,
    "residual": _cmd_residual,
    "ims": _cmd_ims,
    "validate": _cmd_validate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bogobench",
        description="mean-field / quadratic-fluctuation studies on finite "
                    "mode bases, cross-checked by exact diagonalization",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON study config")
        p.add_argument("--out", default=None, help="output directory "
                       "(default: config output_dir)")
        p.add_argument("--seed", type=int, default=None,
                       help="override config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="BLAS thread budget (kernels are deterministic "
                       "and single-threaded)")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    try:
        cfg = StudyConfig.from_json(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        outdir = args.out or cfg.output_dir
        os.makedirs(outdir, exist_ok=True)
        if args.threads and args.threads > 0:
            try:
                from threadpoolctl import threadpool_limits
                threadpool_limits(limits=args.threads)
            except ImportError:
                pass

        t0 = time.perf_counter()
        model = resolve_model(cfg.model)
        report = validate_model(model)
        if not report.passed:
            raise ValidationError(f"model failed validation: {report}")
        t_model = time.perf_counter() - t0

        t1 = time.perf_counter()
        outputs, summary = COMMANDS[args.subcommand](model, cfg, outdir)
        t_run = time.perf_counter() - t1

        plot = _emit_plot_script(outdir, args.subcommand)
        if plot:
            outputs = outputs + [plot]
        _write_manifest(outdir, args.subcommand, cfg, args,
                        {"model_setup": t_model, "run": t_run}, outputs)
        if not args.quiet:
            print(f"bogobench {args.subcommand}: wrote "
                  f"{', '.join(outputs + ['manifest.json'])} to {outdir}")
            if summary:
                for k, v in summary.items():
                    if isinstance(v, (int, float)):
                        print(f"  {k} = {v:.12g}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GapViolationError, ValidationError, ConvergenceError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceLimitError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
