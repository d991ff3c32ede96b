import csv
import filecmp
import os
import warnings

import numpy as np
import pytest

from blobflow import __version__
from blobflow.cli import main
from blobflow.config import ConfigError, load_config, parse_config, schema_markdown

SMALL = """
[init]
N = 12
[sim]
T = 0.05
snapshot_every = 2
[kernel]
epsilon = 0.4
"""


def _run(tmp_path, command, text, name="out", extra=()):
    cfg = tmp_path / f"{name}.ini"
    cfg.write_text(text)
    out = tmp_path / name
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def _read(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


# -- config --------------------------------------------------------------------------------

def test_defaults_parse():
    cfg = parse_config("")
    assert cfg.get("kernel", "family") == "polybump"
    assert cfg.get("quad", "n") == 8 and cfg.get("quad", "n_energy") == 16
    assert cfg.dt(0.3) == pytest.approx(0.009)


@pytest.mark.parametrize("text", [
    "[nope]\nx = 1\n",
    "[kernel]\nwidth = 0.3\n",
    "[kernel]\nepsilon = abc\n",
    "[problem]\nequation = fast\nm = 1.2\n[kernel]\nfamily = barenblatt\n",
    "[study]\nN = 32 64\nepsilon = 0.3\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        rc = parse_config(text)
        rc.problem()


def test_overrides_and_resolved_text():
    cfg = parse_config("", {("run", "seed"): 7})
    assert cfg.get("run", "seed") == 7
    again = parse_config(cfg.resolved_text())
    assert again.values == cfg.values


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.ini"))


def test_output_dir_env(monkeypatch):
    cfg = parse_config("")
    monkeypatch.setenv("BLOBFLOW_OUT", "/tmp/somewhere")
    assert cfg.output_dir() == "/tmp/somewhere"
    assert cfg.output_dir("explicit") == "explicit"


def test_schema_markdown_lists_every_key():
    md = schema_markdown()
    for key in ("epsilon", "n_energy", "checkpoints", "norm_scale"):
        assert f"`{key}`" in md


# -- commands --------------------------------------------------------------------------------

def test_simulate_outputs_and_determinism(tmp_path):
    code, out = _run(tmp_path, "simulate", SMALL, "a")
    assert code == 0
    for name in ("trajectory.csv", "report.csv", "final_state.csv", "energy.svg", "density.svg",
                 "resolved_config.ini", "VERSION"):
        assert (out / name).exists(), name
    assert (out / "VERSION").read_text().strip() == f"blobflow {__version__}"
    header, report = _read(out / "report.csv")
    assert header[0] == "t" and "H_eps_sigma" in header
    assert np.all(np.diff(report[:, header.index("H_eps_sigma")]) <= 1e-6)
    code, out2 = _run(tmp_path, "simulate", SMALL, "b")
    assert code == 0
    for name in ("trajectory.csv", "report.csv", "final_state.csv"):
        assert filecmp.cmp(out / name, out2 / name, shallow=False)


def test_resolved_config_reruns_identically(tmp_path):
    code, out = _run(tmp_path, "simulate", SMALL, "a")
    resolved = (out / "resolved_config.ini").read_text()
    code2, out2 = _run(tmp_path, "simulate", resolved, "b")
    assert code == code2 == 0
    assert filecmp.cmp(out / "final_state.csv", out2 / "final_state.csv", shallow=False)


def test_config_error_exit_code(tmp_path):
    code, _ = _run(tmp_path, "simulate", "[problem]\nequation = fast\nm = 1.2\n")
    assert code == 2
    code, _ = _run(tmp_path, "simulate", "[kernel]\nunknown = 1\n")
    assert code == 2
    code, _ = _run(tmp_path, "simulate", SMALL.replace("T = 0.05", "T = 0.05\ndt = 1.0"), "dt")
    assert code == 2


def test_blow_up_is_runtime_failure(tmp_path):
    text = """
[init]
N = 4
kind = uniform
a = 999
b = 1000
[potential]
kind = polynomial
coeffs = 0 0 0 0 -1e300
[kernel]
epsilon = 0.4
[sim]
T = 0.05
method = euler
"""
    with np.errstate(over="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        code, _ = _run(tmp_path, "simulate", text)
    assert code == 3


def test_validate_and_negative_control(tmp_path):
    fast = "[validate]\nsamples = 2000\npeetre_samples = 20000\n"
    code, out = _run(tmp_path, "validate", fast, "ok")
    assert code == 0
    with open(out / "validation.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["passed"] == "True" for r in rows)
    code, out = _run(tmp_path, "validate", fast + "norm_scale = 1.01\n", "bad")
    assert code == 1
    with open(out / "validation.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert any(r["passed"] == "False" and r["check"].startswith("mass:") for r in rows)


def test_gibbs_without_potential_matches_simulate(tmp_path):
    base = "[init]\nN = 10\n[kernel]\nepsilon = 0.4\n"
    code, sim = _run(tmp_path, "simulate", base + "[sim]\nT = 0.2\n", "sim")
    assert code == 0
    code, gib = _run(tmp_path, "gibbs", base + "[gibbs]\nT = 0.2\ncheckpoints = 0.2\n", "gib")
    assert code == 0
    _, a = _read(sim / "final_state.csv")
    _, b = _read(gib / "final_state.csv")
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_jko_command(tmp_path):
    text = "[jko]\nM = 12\ntau = 0.1 0.05\nn_steps = 2\ncheckpoints = 0.1\n[kernel]\nepsilon = 0.4\n"
    code, out = _run(tmp_path, "jko", text)
    assert code == 0
    for name in ("jko_tau0.1.csv", "jko_tau0.05.csv", "jko_certificate.csv", "jko_gap.csv"):
        assert (out / name).exists(), name
    header, rows = _read(out / "jko_tau0.1.csv")
    assert header == ["step", "energy", "w2_increment"]
    assert np.all(np.diff(rows[:, 1]) < 0)


def test_convergence_command_threads(tmp_path):
    text = ("[init]\ns0 = 1.0\n[study]\nN = 8 16 32\nepsilon = 0.5 0.45 0.4\ncheckpoints = 0.05\n"
            "[problem]\nsigma = 0\n[kernel]\nfamily = exp1\n")
    code, one = _run(tmp_path, "convergence", text, "one")
    assert code == 0
    code, two = _run(tmp_path, "convergence", text, "two", extra=("--threads", "2"))
    assert code == 0
    assert filecmp.cmp(one / "errors.csv", two / "errors.csv", shallow=False)
    assert (one / "rate_fit.csv").exists()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOBFLOW_OUT", str(tmp_path / "env"))
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL)
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert os.path.exists(tmp_path / "env" / "final_state.csv")


def test_gibbs_near_stationary_from_quantized_target(tmp_path):
    text = ("[init]\nN = 64\ns0 = 1.0\n[kernel]\nfamily = exp1\nepsilon = 0.1\n[problem]\nsigma = 0\n"
            "[potential]\nkind = quadratic\n[gibbs]\nT = 1.0\ncheckpoints = 0.25 0.5 1.0\n[output]\nsvg = false\n")
    code, out = _run(tmp_path, "gibbs", text)
    assert code == 0
    header, rows = _read(out / "gibbs.csv")
    d, floor = rows[:, header.index("dW_gibbs")], rows[:, header.index("floor")]
    assert np.all(d < 3 * floor)
    # V = x^2/2 from N(0, 1) is stationary for the exact flow too
    np.testing.assert_allclose(rows[:, header.index("dW_exact")], d, rtol=1e-6)


def test_convergence_rejects_exp2_lift(tmp_path):
    code, _ = _run(tmp_path, "convergence", "[problem]\nlift = exp2\n")
    assert code == 2


RECIPES = os.path.join(os.path.dirname(__file__), os.pardir, "recipes")


@pytest.mark.parametrize("name", sorted(os.listdir(RECIPES)) if os.path.isdir(RECIPES) else [])
def test_recipes_parse(name):
    cfg = load_config(os.path.join(RECIPES, name))
    cfg.problem()
    cfg.initial_state()
