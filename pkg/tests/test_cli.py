import json
import math
import os

import numpy as np
import pytest

from membrane_logistic import (
    InvariantError,
    RefugeTouchesBoundary,
    SchemaError,
)
from membrane_logistic.cli import main
from membrane_logistic.config import config_from_dict, parse_config
from membrane_logistic.runner import emit, run

MINIMAL = """
[geometry]
kind = "interval"
gamma = 0.5

[command]
name = "LambdaStar"
"""

DEGENERATE = """
[geometry]
kind = "interval"

[coefficients]
mu = 1.0
p = 3.0
a1 = 100.0
a2 = 100.0

[refuges]
regions = [ { subdomain = 1, box = [0.2, 0.3] },
            { subdomain = 2, box = [0.6, 0.8] } ]

[mesh]
n_per_side = 160

[command]
name = "LambdaInfinity"
"""


def test_parse_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.tol == 1e-10
    assert cfg.n_per_side == 256
    assert cfg.command == "LambdaStar"
    assert cfg.output_dir == "out"
    assert cfg.formats == ("csv", "json")


def test_parse_rejects_invalid_exponent():
    with pytest.raises(InvariantError, match="p must exceed 1"):
        parse_config(MINIMAL + "\n[coefficients]\np = 1.0\n")


def test_parse_rejects_refuge_at_interface():
    text = MINIMAL + """
[refuges]
regions = [ { subdomain = 1, box = [0.45, 0.55] } ]
"""
    with pytest.raises(RefugeTouchesBoundary):
        parse_config(text)


def test_parse_rejects_unknown_key():
    with pytest.raises(SchemaError, match="unknown key"):
        parse_config(MINIMAL + "\n[solver]\ntolerance = 1.0\n")
    with pytest.raises(SchemaError, match="unknown section"):
        parse_config(MINIMAL + "\n[misc]\nx = 1\n")


def test_parse_rejects_malformed_toml():
    with pytest.raises(SchemaError, match="malformed TOML"):
        parse_config("[geometry\nkind=")


def test_config_round_trip():
    cfg = parse_config(DEGENERATE)
    again = config_from_dict(cfg.echo)
    assert again.echo == cfg.echo
    assert again.content_hash == cfg.content_hash


def test_run_lambda_star_envelope(tmp_path):
    cfg = parse_config(MINIMAL + f"\n[mesh]\nn_per_side = 128\n"
                       f"\n[output]\ndir = '{tmp_path}'\n")
    env = run(cfg)
    assert env.ok
    lam = env.results["tables"]["lambda_star"]["rows"][0][0]
    assert lam == pytest.approx(math.pi ** 2, abs=1e-3)
    mc = env.mesh_convergence
    assert abs(mc["richardson"] - math.pi ** 2) <= 1e-5
    paths = emit(env, str(tmp_path))
    names = {os.path.basename(p) for p in paths}
    assert names == {"lambda_star.csv", "envelope.json"}
    payload = json.loads((tmp_path / "envelope.json").read_text())
    assert set(payload) == {"config", "hash", "results", "timings",
                            "mesh_convergence"}


def test_cli_exit_codes(tmp_path):
    good = tmp_path / "good.toml"
    good.write_text(MINIMAL + f"\n[mesh]\nn_per_side = 64\n"
                    f"\n[output]\ndir = '{tmp_path / 'out'}'\n")
    assert main([str(good)]) == 0

    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL + "\n[coefficients]\nmu = -1.0\n")
    assert main([str(bad)]) == 2
    assert main([str(tmp_path / "missing.toml")]) == 2


def test_cli_failing_item_exit_code(tmp_path):
    # A sweep entry above the ceiling is recorded as a failed item.
    text = DEGENERATE.replace('name = "LambdaInfinity"',
                              'name = "Blowup"\nlambda_grid = [50.0, 5000.0]')
    path = tmp_path / "blowup.toml"
    path.write_text(text + f"\n[output]\ndir = '{tmp_path / 'out'}'\n")
    assert main([str(path)]) == 1
    rows = (tmp_path / "out" / "blowup.csv").read_text().splitlines()
    assert rows[0] == "lambda,max_on_K1,max_on_K2,exterior_diff"
    assert len(rows) == 3


def test_branch_below_threshold_reports_trivial(tmp_path):
    text = MINIMAL.replace(
        'name = "LambdaStar"',
        'name = "Branch"\nlambda_grid = [2.0, 4.0, 6.0]')
    cfg = parse_config(text + "\n[mesh]\nn_per_side = 128\n")
    env = run(cfg)
    assert env.ok
    rows = env.results["tables"]["branch"]["rows"]
    assert len(rows) == 3
    assert all(row[1] <= 1e-8 for row in rows)


def test_eigen_profile_schema(tmp_path):
    text = MINIMAL.replace('name = "LambdaStar"', 'name = "Eigen"')
    cfg = parse_config(text + "\n[mesh]\nn_per_side = 64\n")
    env = run(cfg)
    tab = env.results["tables"]["eigenfunction"]
    assert tab["header"] == ["subdomain", "x", "value"]
    assert len(tab["rows"]) == cfg.n_per_side * 2 + 2


def test_csv_bit_determinism(tmp_path):
    text = DEGENERATE + f"\n[output]\ndir = '{tmp_path}'\n"
    cfg = parse_config(text)
    emit(run(cfg), str(tmp_path))
    first = (tmp_path / "lambda_infinity.csv").read_bytes()
    emit(run(parse_config(text)), str(tmp_path))
    second = (tmp_path / "lambda_infinity.csv").read_bytes()
    assert first == second


def test_solve_requires_lambda():
    text = MINIMAL.replace('name = "LambdaStar"', 'name = "Solve"')
    cfg = parse_config(text)
    from membrane_logistic.errors import MembraneError
    with pytest.raises(MembraneError, match="lambda"):
        run(cfg)


def test_solve_profile(tmp_path):
    text = MINIMAL.replace('name = "LambdaStar"',
                           'name = "Solve"\nlambda = 15.0')
    cfg = parse_config(text + "\n[mesh]\nn_per_side = 128\n")
    env = run(cfg)
    assert env.ok
    scalars = env.results["scalars"]
    assert scalars["sup_norm"] > 0.0
    assert scalars["residual"] <= 1e-9
    assert env.mesh_convergence is not None
