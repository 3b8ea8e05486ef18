import os
import subprocess
import sys

import numpy as np
import pytest

from skewlab import ParseError, ValidationError
from skewlab.config import load_config, parse_config

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(REPO, "configs")

MINIMAL_TORUS = """
[map]
kind = torus
matrix = 3, 1, 1, 1

[bump]
amplitude = 0.05
radius = 0.15

[run]
seed = 0
"""


def run_cli(args, env_extra=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "skewlab", *args],
        capture_output=True,
        text=True,
        env=env,
        cwd=REPO,
    )


def test_shipped_configs_parse():
    coupled = load_config(os.path.join(CONFIGS, "paper_example.cfg"))
    assert coupled.F.bump is not None
    assert coupled.F.base_map.dim == 2
    product = load_config(os.path.join(CONFIGS, "product.cfg"))
    assert product.F.bump is None
    assert product.threshold("radius_min") == 0.2
    assert product.threshold("radius_max") is None
    doubling = load_config(os.path.join(CONFIGS, "doubling.cfg"))
    assert doubling.F.base_map.dim == 1
    assert doubling.F.bump is not None


def test_parse_minimal_and_defaults():
    cfg = parse_config(MINIMAL_TORUS)
    assert cfg.seed == 0
    assert cfg.exp_int("supath_targets") == 20
    assert cfg.threshold("exponent_tol") == 1e-3
    assert cfg.threshold("spread_min") is None
    p = cfg.exp_point("spread_anchor")
    assert p.base.shape == (2,) and p.theta == 0.0


def test_rejects_nonhyperbolic_matrix():
    bad = MINIMAL_TORUS.replace("3, 1, 1, 1", "1, 0, 0, 1")
    with pytest.raises(ValidationError, match="map.matrix"):
        parse_config(bad)


def test_rejects_unknown_key_and_section():
    with pytest.raises(ValidationError, match="unknown key"):
        parse_config(MINIMAL_TORUS + "\n[experiments]\nwhatever = 3\n")
    with pytest.raises(ValidationError, match="unknown section"):
        parse_config(MINIMAL_TORUS + "\n[extras]\nx = 1\n")
    with pytest.raises(ValidationError, match="missing required section"):
        parse_config("[run]\nseed = 1\n")


def test_rejects_bad_supath_expect():
    with pytest.raises(ValidationError, match="supath_expect"):
        parse_config(MINIMAL_TORUS + "\n[thresholds]\nsupath_expect = maybe\n")


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError, match="line 1"):
        parse_config("not a section header\n")


def test_exp_point_checks_dimension():
    cfg = parse_config(MINIMAL_TORUS + "\n[experiments]\nspread_anchor = 0.1, 0.2\n")
    with pytest.raises(ValidationError, match="coordinates"):
        cfg.exp_point("spread_anchor")


def test_matrix_entries_must_be_integers():
    bad = MINIMAL_TORUS.replace("3, 1, 1, 1", "3.5, 1, 1, 1")
    with pytest.raises(ValidationError, match="integer"):
        parse_config(bad)


def test_cli_volume_check_passes(tmp_path):
    out = str(tmp_path / "out")
    r = run_cli(["volume-check", "--config", os.path.join(CONFIGS, "product.cfg"), "--out", out])
    assert r.returncode == 0
    assert "PASS volume-check" in r.stdout
    manifest = os.path.join(out, "manifest.txt")
    assert os.path.exists(manifest)
    with open(manifest) as fh:
        lines = fh.read().splitlines()
    for line in lines:
        if line.startswith("csv: "):
            assert os.path.exists(os.path.join(out, line[len("csv: "):]))
    assert any(line == "PASS volume-check" for line in lines)


def test_cli_missing_config_exits_2(tmp_path):
    r = run_cli(["volume-check", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")])
    assert r.returncode == 2
    assert "config error" in r.stderr


def test_cli_malformed_config_exits_2(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[map]\nkind = torus\nmatrix = 1, 0, 0, 1\n")
    r = run_cli(["volume-check", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert r.returncode == 2
    assert "config error" in r.stderr


def test_cli_threshold_failure_exits_1(tmp_path):
    cfg = tmp_path / "strict.cfg"
    cfg.write_text(MINIMAL_TORUS + "\n[thresholds]\nvolume_tol = 1e-30\n")
    out = str(tmp_path / "out")
    r = run_cli(["volume-check", "--config", str(cfg), "--out", out])
    assert r.returncode == 1
    assert "FAIL volume-check" in r.stdout


def test_cli_spread_is_deterministic(tmp_path):
    cfgp = os.path.join(CONFIGS, "paper_example.cfg")
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        r = run_cli(["spread", "--config", cfgp, "--out", out], env_extra={"SKEWLAB_THREADS": "1"})
        assert r.returncode == 0
        with open(os.path.join(out, "spread.csv"), "rb") as fh:
            outs.append(fh.read())
    assert outs[0] == outs[1]


def test_cli_rejects_unknown_subcommand():
    r = run_cli(["frobnicate", "--config", os.path.join(CONFIGS, "product.cfg")])
    assert r.returncode == 2
