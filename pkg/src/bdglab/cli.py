"""Command line runner.

    bdglab <simulate|solve|ratio|counterexample|verify> --config PATH [--out DIR] [--workers K]

Exit codes: 0 success, 1 a verify check failed, 2 configuration error,
3 numerical failure.  Errors go to stderr as one line
``bdglab: error kind=<kind> message=<json string>``.
The output directory is, in order of precedence, ``--out``, the
``BDGLAB_OUT`` environment variable, then ``[experiment] output``.
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
from .bdg import Z95, bdg_ratio, lenglart_check
from .config import ExperimentConfig, load_config
from .counterexample import CSV_COLUMNS, divergence_report
from .errors import ConfigError, ContractViolation, InvalidArgument, NumericalFailure
from .generators import (
    check_H2,
    check_lipschitz,
    check_envelope_bound,
    energy_mu,
    generator_names,
    make_generator,
    sample_points,
)
from .gexpect import g_expect
from .kernels import BACKEND
from .output import CsvTable, line_chart, write_manifest, write_svg
from .paths import SeedSpec, make_uniform_grid, simulate_brownian
from .solver import RegressionBasis, analytic_solution, make_terminal, solve_backward

SUBCOMMANDS = ("simulate", "solve", "ratio", "counterexample", "verify")
OUT_ENV = "BDGLAB_OUT"

# distinct streams so the verify samples never reuse path randomness
_VERIFY_STREAM = 1


def _plot(cfg, path: Path, make_svg) -> None:
    """Plots are a convenience; a failure here never changes the exit code."""
    if not cfg.svg:
        return
    try:
        write_svg(path, make_svg())
    except (OSError, ValueError, ArithmeticError):
        pass


def _batch(cfg: ExperimentConfig, steps: int | None = None):
    grid = make_uniform_grid(cfg.horizon, steps or cfg.steps)
    return simulate_brownian(grid, cfg.dims, cfg.paths, SeedSpec(cfg.seed), workers=cfg.workers)


def _analytic_for(cfg: ExperimentConfig, batch):
    """Closed-form solution matching the configured (generator, terminal), if any."""
    tp = cfg.terminal_params
    if cfg.terminal == "constant":
        return analytic_solution("constant", batch, value=tp.get("value", 0.0))
    if cfg.terminal == "brownian" and tp.get("shift", 0.0) == 0.0:
        if cfg.generator == "zero":
            return analytic_solution("classical_martingale", batch)
        coef = cfg.generator_params.get("coef", 1.0)
        if cfg.generator == "linear_z" and isinstance(coef, float):
            return analytic_solution("linear_z_drift", batch, coef=coef)
    return None


def _solve(cfg: ExperimentConfig, batch):
    g = make_generator(cfg.generator, **cfg.generator_params)
    xi = make_terminal(cfg.terminal, **cfg.terminal_params)
    return g, solve_backward(batch, g, xi, RegressionBasis(cfg.degree), cfg.picard_iters)


def cmd_simulate(cfg, out: Path):
    batch = _batch(cfg)
    lv = batch.levels
    header = ["node", "t"]
    for k in range(cfg.dims):
        header += [f"mean_b{k}", f"var_b{k}"]
    table = CsvTable(header)
    ddof = 1 if cfg.paths > 1 else 0
    for i, t in enumerate(batch.grid.nodes):
        row = [i, float(t)]
        for k in range(cfg.dims):
            x = lv[:, i, k]
            row += [float(x.mean()), float(x.var(ddof=ddof))]
        table.add(*row)
    table.write(out / "simulate.csv")
    return 0, []


def cmd_solve(cfg, out: Path):
    batch = _batch(cfg)
    g = make_generator(cfg.generator, **cfg.generator_params)
    xi = make_terminal(cfg.terminal, **cfg.terminal_params)
    ge = g_expect(batch, g, xi, RegressionBasis(cfg.degree), cfg.picard_iters)
    sol = ge.solution
    ref = _analytic_for(cfg, batch)
    d = sol.diagnostics
    header = ["node", "t", "y_mean", "y_std"]
    header += [f"z{k}_mean" for k in range(cfg.dims)]
    header += ["regression_rmse", "martingale_rmse", "picard_last_update"]
    if ref is not None:
        header.append("y_rmse_analytic")
    table = CsvTable(header)
    n = batch.grid.steps
    for i, t in enumerate(batch.grid.nodes):
        row = [i, float(t), float(sol.Y[:, i].mean()), float(sol.Y[:, i].std())]
        if i < n:
            row += [float(sol.Z[:, i, k].mean()) for k in range(cfg.dims)]
            row += [float(d.regression_rmse[i]), float(d.martingale_rmse[i]), float(d.picard_updates[i, -1])]
        else:
            row += [0.0] * cfg.dims + [0.0, 0.0, 0.0]
        if ref is not None:
            row.append(float(np.sqrt(np.mean((sol.Y[:, i] - ref.Y[:, i]) ** 2))))
        table.add(*row)
    table.write(out / "solve.csv")

    gt = CsvTable(["value", "std_error", "ci_lo", "ci_hi"])
    gt.add(ge.value, ge.std_error, ge.value - Z95 * ge.std_error, ge.value + Z95 * ge.std_error)
    gt.write(out / "gexpect.csv")
    summary = [("g_expectation", f"{ge.value:.17g}")]

    if cfg.refine_steps:
        if ref is None:
            raise ConfigError("[solver] refine_steps needs a generator/terminal pair with a closed-form solution")
        rt = CsvTable(["steps", "max_node_rmse"])
        xs, ys = [], []
        for steps in cfg.refine_steps:
            b = _batch(cfg, steps)
            _, s = _solve(cfg, b)
            r = _analytic_for(cfg, b)
            err = float(np.sqrt(np.mean((s.Y - r.Y) ** 2, axis=0)).max())
            rt.add(steps, err)
            xs.append(steps)
            ys.append(err)
        rt.write(out / "refinement.csv")
        _plot(cfg, out / "refinement.svg",
              lambda: line_chart({"max-node RMSE": (xs, ys)}, "RMSE vs N", "N", "RMSE", logx=True, logy=True))
    return 0, summary


def cmd_ratio(cfg, out: Path):
    batch = _batch(cfg)
    _, sol = _solve(cfg, batch)
    header = [
        "p", "lhs_mean", "lhs_se", "lhs_ci_lo", "lhs_ci_hi",
        "rhs_mean", "rhs_se", "rhs_ci_lo", "rhs_ci_hi",
        "ratio_upper", "ratio_upper_ci_lo", "ratio_upper_ci_hi",
        "ratio_lower", "ratio_lower_ci_lo", "ratio_lower_ci_hi",
    ]
    table = CsvTable(header)
    ps, ups = [], []
    for p in cfg.p_list:
        r = bdg_ratio(sol, p, allow_nonzero_start=cfg.allow_nonzero_start)
        table.add(
            p, r.lhs.mean, r.lhs.std_error, *r.lhs.ci95,
            r.rhs.mean, r.rhs.std_error, *r.rhs.ci95,
            r.ratio_upper, *r.ci, r.ratio_lower, *r.ci_lower,
        )
        ps.append(p)
        ups.append(r.ratio_upper)
    table.write(out / "ratio.csv")
    _plot(cfg, out / "ratio.svg",
          lambda: line_chart({"E[(Y*)^p] / E[<Y>^(p/2)]": (ps, ups)}, "BDG ratio vs p", "p", "ratio"))
    return 0, [("y0_max_abs", f"{float(np.max(np.abs(sol.Y[:, 0]))):.17g}")]


def cmd_counterexample(cfg, out: Path):
    if cfg.dims != 1:
        raise ConfigError("counterexample needs [experiment] dims = 1")
    batch = _batch(cfg)
    rep = divergence_report(cfg.n_list, batch, cfg.counterexample_p)
    table = CsvTable(CSV_COLUMNS)
    for row in rep.rows:
        table.add(*row.csv_values())
    table.write(out / "counterexample.csv")
    ns = [r.n for r in rep.rows]
    _plot(
        cfg,
        out / "counterexample.svg",
        lambda: line_chart(
            {"measured r(n)": (ns, [r.ratio for r in rep.rows])},
            "ratio E[sup|Y^n|] / E[<Y^n>^(1/2)] vs n",
            "n",
            "r(n)",
            logx=True,
            logy=True,
        ),
    )
    summary = [
        ("loglog_slope", f"{rep.slope:.17g}"),
        ("ratio_increasing", str(rep.ratio_increasing)),
        ("lower_side_holds", ", ".join(str(v) for v in rep.lower_side_holds)),
        ("failing_hypothesis", rep.failing_hypothesis),
    ]
    return 0, summary


def cmd_verify(cfg, out: Path):
    names = cfg.verify_generators or generator_names()
    rng = np.random.default_rng([cfg.seed, _VERIFY_STREAM])
    grid = make_uniform_grid(cfg.horizon, cfg.steps)
    table = CsvTable(["generator", "check", "max_value", "tolerance", "passed", "samples"])
    failed = False
    for name in names:
        params = cfg.generator_params if name == cfg.generator else {}
        g = make_generator(name, **params)
        t, y, z = sample_points(rng, cfg.verify_samples, cfg.horizon, cfg.verify_box, cfg.dims)
        _, y2, z2 = sample_points(rng, cfg.verify_samples, cfg.horizon, cfg.verify_box, cfg.dims)
        reports = []
        if g.claims_H2:
            reports.append(check_H2(g, y[:200], t[:50], dims=cfg.dims))
        if g.claims_H1:
            reports.append(check_lipschitz(g, t, y, z, y2, z2))
        if g.lipschitz:
            reports.append(check_envelope_bound(g, t, y, z))
        for rep in reports:
            table.add(rep.generator, rep.check, rep.max_value, rep.tolerance, rep.passed, rep.samples)
            failed |= not rep.passed
        if g.claims_H1:
            try:
                mu = energy_mu(g, grid).mu
                ok = math.isfinite(mu)
            except ContractViolation:
                mu, ok = 0.0, False
            table.add(g.name, "energy_mu_finite", mu, 0.0, ok, 0)
            failed |= not ok
    table.write(out / "verify.csv")

    batch = _batch(cfg)
    X = batch.levels[:, :, 0] ** 2
    A = np.broadcast_to(batch.grid.nodes, X.shape)
    lt = CsvTable(["k", "constant", "dominated", "screen_worst_z", "lhs_mean", "lhs_se", "rhs_mean", "bound", "margin_se", "holds"])
    for k in cfg.lenglart_k:
        r = lenglart_check(X, A, k)
        holds = r.holds is True  # no verdict when the domination screen fails
        lt.add(k, r.constant, r.dominated, r.screen_worst_z, r.lhs.mean, r.lhs.std_error, r.rhs.mean, r.bound, r.margin_se, holds)
        failed |= not holds
    lt.write(out / "lenglart.csv")
    return (1 if failed else 0), [("verify_failed", str(failed))]


_COMMANDS = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "ratio": cmd_ratio,
    "counterexample": cmd_counterexample,
    "verify": cmd_verify,
}


def _error(kind: str, message: str) -> None:
    print(f"bdglab: error kind={kind} message={json.dumps(message)}", file=sys.stderr)


def run(subcommand: str, config_path, out: str | None = None, workers: int | None = None) -> int:
    """Run one subcommand; returns the process exit code."""
    if subcommand not in _COMMANDS:
        _error("config", f"unknown subcommand {subcommand!r}")
        return 2
    try:
        cfg = load_config(config_path)
        if workers is not None:
            if workers < 1:
                raise ConfigError("--workers must be >= 1")
            cfg.workers = workers
        out_dir = Path(out or os.environ.get(OUT_ENV) or cfg.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        code, summary = _COMMANDS[subcommand](cfg, out_dir)
    except (ConfigError, InvalidArgument, ContractViolation) as exc:
        _error("config", str(exc))
        return 2
    except NumericalFailure as exc:
        _error("numerical", str(exc))
        return 3
    except OSError as exc:
        _error("io", str(exc))
        return 2
    entries = [
        ("tool", "bdglab"),
        ("version", __version__),
        ("subcommand", subcommand),
        ("kernel_backend", BACKEND),
        ("seed", str(cfg.seed)),
        ("exit_code", str(code)),
    ]
    entries += [(f"config.{k}", v) for k, v in cfg.resolved()]
    entries += [(f"result.{k}", v) for k, v in summary]
    write_manifest(out_dir / "manifest.txt", entries)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bdglab", description=__doc__.split("\n\n")[0])
    # validated by run() so an unknown name gets the same machine-readable error line
    parser.add_argument("subcommand", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    parser.add_argument("--config", required=True, help="experiment config (INI)")
    parser.add_argument("--out", default=None, help=f"output directory (overrides ${OUT_ENV} and the config)")
    parser.add_argument("--workers", type=int, default=None, help="worker threads for path generation")
    args = parser.parse_args(argv)
    return run(args.subcommand, args.config, args.out, args.workers)


if __name__ == "__main__":
    sys.exit(main())
