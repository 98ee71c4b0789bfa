import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from bdglab.cli import main, run
from bdglab.config import parse_config
from bdglab.errors import ConfigError
from bdglab.generators import GeneratorSpec, register_generator, unregister_generator

BASE = """
[experiment]
schema_version = 1
seed = 42
horizon = 1.0
steps = {steps}
paths = {paths}
"""


def _write(tmp_path, body, steps=10, paths=5000, name="exp.ini"):
    p = tmp_path / name
    p.write_text(BASE.format(steps=steps, paths=paths) + body)
    return p


def _rows(path):
    lines = Path(path).read_text().splitlines()
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


def _all_finite(path):
    _, rows = _rows(path)
    for row in rows:
        for cell in row:
            try:
                v = float(cell)
            except ValueError:
                continue
            if not math.isfinite(v):
                return False
    return True


# ---- config parsing ----------------------------------------------------------


def test_parse_defaults():
    cfg = parse_config(BASE.format(steps=5, paths=100))
    assert (cfg.seed, cfg.steps, cfg.paths, cfg.dims, cfg.workers) == (42, 5, 100, 1, 1)
    assert cfg.generator == "zero" and cfg.terminal == "brownian"


def test_parse_full():
    cfg = parse_config(
        BASE.format(steps=5, paths=100)
        + "[generator]\nname = time_scaled\nprofile = sin\nscale = 2\n"
        + "[terminal]\nname = call\nstrike = 0.5\n"
        + "[solver]\ndegree = 2\npicard_iters = 4\nrefine_steps = 5, 10\n"
        + "[ratio]\np_list = 1, 2, 4\n"
        + "[counterexample]\nn_list = 1, 2\np = 2\n"
        + "[verify]\ngenerators = zero, quadratic\nlenglart_k = 0.5\n"
    )
    assert cfg.generator_params == {"profile": "sin", "scale": 2.0}
    assert cfg.terminal_params == {"strike": 0.5}
    assert cfg.refine_steps == [5, 10] and cfg.p_list == [1.0, 2.0, 4.0]
    assert cfg.verify_generators == ["zero", "quadratic"]


@pytest.mark.parametrize(
    "text",
    [
        BASE.format(steps=0, paths=10),
        BASE.format(steps=5, paths=0),
        BASE.format(steps=5, paths=10).replace("schema_version = 1", "schema_version = 2"),
        BASE.format(steps=5, paths=10).replace("horizon = 1.0", "horizon = -1"),
        BASE.format(steps=5, paths=10).replace("horizon = 1.0", "horizon = nan"),
        BASE.format(steps=5, paths=10) + "colour = blue\n",
        BASE.format(steps=5, paths=10) + "[plots]\nx = 1\n",
        BASE.format(steps=5, paths=10) + "[generator]\nname = cubic\n",
        BASE.format(steps=5, paths=10) + "[generator]\nname = linear_z\nslope = 1\n",
        BASE.format(steps=5, paths=10) + "[ratio]\np_list = 0.5\n",
        BASE.format(steps=5, paths=10) + "[counterexample]\nn_list = 2, 1\n",
        BASE.format(steps=5, paths=10) + "[verify]\nlenglart_k = 1.0\n",
        "[experiment]\nseed = 1\n",
        "not an ini file",
    ],
)
def test_parse_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


# ---- subcommands --------------------------------------------------------------


def test_steps_zero_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "", steps=0)
    assert run("simulate", cfg, out=str(tmp_path / "o")) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("bdglab: error kind=config message=")


def test_unknown_subcommand_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "")
    assert main(["integrate", "--config", str(cfg)]) == 2
    assert "kind=config" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path, capsys):
    assert run("simulate", tmp_path / "nope.ini") == 2
    assert "kind=config" in capsys.readouterr().err


def test_simulate(tmp_path):
    cfg = _write(tmp_path, "", paths=20_000)
    out = tmp_path / "o"
    assert run("simulate", cfg, out=str(out)) == 0
    header, rows = _rows(out / "simulate.csv")
    assert header == ["node", "t", "mean_b0", "var_b0"]
    assert len(rows) == 11
    assert float(rows[-1][3]) == pytest.approx(1.0, abs=0.05)
    manifest = (out / "manifest.txt").read_text()
    for key in ("tool = bdglab", "version = ", "seed = 42", "kernel_backend = ", "config.steps = 10"):
        assert key in manifest


def test_counterexample_subcommand(tmp_path):
    cfg = _write(tmp_path, "[counterexample]\nn_list = 1, 2, 4\n")
    out = tmp_path / "o"
    assert run("counterexample", cfg, out=str(out)) == 0
    header, rows = _rows(out / "counterexample.csv")
    assert header == [
        "n", "lhs_root_exact", "sup_mc_mean", "sup_mc_ci_lo", "sup_mc_ci_hi",
        "sup_lower_bound_analytic", "ratio", "ratio_over_n",
    ]
    assert len(rows) == 3
    assert [float(r[1]) for r in rows] == [1.0, 2.0, 4.0]
    manifest = (out / "manifest.txt").read_text()
    assert "result.failing_hypothesis = (H1)" in manifest
    assert "result.loglog_slope = " in manifest
    assert (out / "counterexample.svg").read_text().startswith("<svg")


def test_counterexample_needs_one_dimension(tmp_path):
    cfg = _write(tmp_path, "")
    cfg.write_text(cfg.read_text().replace("paths = 5000", "paths = 5000\ndims = 2"))
    assert run("counterexample", cfg, out=str(tmp_path / "o")) == 2


def test_ratio_subcommand(tmp_path):
    cfg = _write(tmp_path, "[generator]\nname = zero\n[terminal]\nname = brownian\n[ratio]\np_list = 1, 2, 4\n", paths=20_000)
    out = tmp_path / "o"
    assert run("ratio", cfg, out=str(out)) == 0
    header, rows = _rows(out / "ratio.csv")
    assert len(rows) == 3 and header[0] == "p"
    assert [float(r[0]) for r in rows] == [1.0, 2.0, 4.0]
    assert _all_finite(out / "ratio.csv")


def test_ratio_requires_vanishing_start_when_asked(tmp_path):
    cfg = _write(tmp_path, "[ratio]\nallow_nonzero_start = false\n")
    assert run("ratio", cfg, out=str(tmp_path / "o")) == 2


def test_degenerate_ratio_exits_3(tmp_path, capsys):
    cfg = _write(tmp_path, "[terminal]\nname = constant\nvalue = 0\n")
    assert run("ratio", cfg, out=str(tmp_path / "o")) == 3
    assert "kind=numerical" in capsys.readouterr().err


def test_solve_subcommand_with_refinement(tmp_path):
    cfg = _write(
        tmp_path,
        "[generator]\nname = linear_z\ncoef = 0.5\n[solver]\nrefine_steps = 5, 10\n",
        paths=20_000,
    )
    out = tmp_path / "o"
    assert run("solve", cfg, out=str(out)) == 0
    header, rows = _rows(out / "solve.csv")
    assert "y_rmse_analytic" in header and len(rows) == 11
    _, g = _rows(out / "gexpect.csv")
    assert abs(float(g[0][0]) - 0.5) < 3 * float(g[0][1])
    _, ref = _rows(out / "refinement.csv")
    assert [int(r[0]) for r in ref] == [5, 10]
    for f in ("solve.csv", "gexpect.csv", "refinement.csv"):
        assert _all_finite(out / f)


def test_refinement_without_closed_form_is_config_error(tmp_path):
    cfg = _write(tmp_path, "[terminal]\nname = call\n[solver]\nrefine_steps = 5\n")
    assert run("solve", cfg, out=str(tmp_path / "o")) == 2


def test_quadratic_solve_is_contract_error(tmp_path, capsys):
    cfg = _write(tmp_path, "[generator]\nname = quadratic\n")
    assert run("solve", cfg, out=str(tmp_path / "o")) == 2
    assert "kind=config" in capsys.readouterr().err


def test_verify_builtins_pass(tmp_path):
    cfg = _write(tmp_path, "", paths=20_000)
    out = tmp_path / "o"
    assert run("verify", cfg, out=str(out)) == 0
    header, rows = _rows(out / "verify.csv")
    assert header == ["generator", "check", "max_value", "tolerance", "passed", "samples"]
    assert {r[0] for r in rows} >= {"zero", "linear_z", "time_scaled", "quadratic"}
    assert all(r[4] == "1" for r in rows)
    _, lg = _rows(out / "lenglart.csv")
    assert len(lg) == 3 and all(r[-1] == "1" for r in lg)


def test_verify_catches_H2_violation(tmp_path):
    double = GeneratorSpec(
        "shifted", lambda t, y, z: z[..., 0] + 1.0, lambda t: np.zeros(np.shape(t)), lambda t: np.ones(np.shape(t)), True, True
    )
    register_generator("shifted", lambda: double)
    try:
        cfg = _write(tmp_path, "[verify]\ngenerators = zero, shifted\n")
        out = tmp_path / "o"
        assert run("verify", cfg, out=str(out)) == 1
        _, rows = _rows(out / "verify.csv")
        bad = [r for r in rows if r[0] == "shifted" and r[1] == "H2"]
        assert bad and bad[0][4] == "0" and float(bad[0][2]) == 1.0
        assert all(r[4] == "1" for r in rows if r[0] == "zero")
    finally:
        unregister_generator("shifted")


def test_output_dir_precedence(tmp_path, monkeypatch):
    cfg = _write(tmp_path, f"output = {tmp_path / 'from_config'}\n")
    monkeypatch.delenv("BDGLAB_OUT", raising=False)
    assert run("simulate", cfg) == 0
    assert (tmp_path / "from_config" / "simulate.csv").exists()
    monkeypatch.setenv("BDGLAB_OUT", str(tmp_path / "from_env"))
    assert run("simulate", cfg) == 0
    assert (tmp_path / "from_env" / "simulate.csv").exists()
    assert run("simulate", cfg, out=str(tmp_path / "from_flag")) == 0
    assert (tmp_path / "from_flag" / "simulate.csv").exists()


def test_svg_failure_does_not_gate(tmp_path):
    cfg = _write(tmp_path, "[counterexample]\nn_list = 1, 2\n")
    out = tmp_path / "o"
    (out / "counterexample.svg").mkdir(parents=True)  # unwritable as a file
    assert run("counterexample", cfg, out=str(out)) == 0


@pytest.mark.parametrize("sub,body", [
    ("counterexample", "[counterexample]\nn_list = 1, 2, 4\n"),
    ("solve", "[generator]\nname = linear_z\ncoef = 0.5\n"),
    ("ratio", ""),
])
def test_worker_count_byte_identical(tmp_path, sub, body):
    cfg = _write(tmp_path, body, paths=9000)
    outs = []
    for w in (1, 8):
        out = tmp_path / f"w{w}"
        assert run(sub, cfg, out=str(out), workers=w) == 0
        outs.append(sorted((p.name, p.read_bytes()) for p in out.glob("*.csv")))
    assert outs[0] == outs[1]


def test_csv_line_endings(tmp_path):
    cfg = _write(tmp_path, "")
    out = tmp_path / "o"
    run("simulate", cfg, out=str(out))
    assert b"\r" not in (out / "simulate.csv").read_bytes()


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, "[counterexample]\nn_list = 1, 2\n", paths=500)
    proc = subprocess.run(
        [sys.executable, "-m", "bdglab.cli", "counterexample", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    bad = subprocess.run(
        [sys.executable, "-m", "bdglab.cli", "simulate", "--config", str(cfg), "--workers", "0"],
        capture_output=True,
        text=True,
    )
    assert bad.returncode == 2 and bad.stderr.startswith("bdglab: error kind=config")
