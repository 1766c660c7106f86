import copy
import csv
import json
import subprocess
import sys

import pytest

from conic_entropy.runner import ConfigError, main, parse_config

from conftest import ROOT

BASE = {
    "n": 3,
    "cross_section": {"round_sphere": {"a": 1.0}},
    "warp": "exact",
    "outer_radius": 1.0,
    "outer_bc": "neumann",
    "mesh": {"points": 128, "grading": "auto"},
    "tau": 1.0,
}


def with_(path, value):
    cfg = copy.deepcopy(BASE)
    node = cfg
    *head, last = path
    for key in head:
        node = node[key]
    if value is KeyError:
        del node[last]
    else:
        node[last] = value
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_defaults_are_filled_in():
    cfg = parse_config(BASE)
    assert cfg["solver"] == {"max_iters": 2000, "tol": 1e-10, "step0": 1.0, "eigen_tol": 1e-10}
    assert cfg["tau"] == [1.0] and cfg["seed"] == 0 and cfg["epsilon0"] is None


def test_hash_ignores_output_dir_only():
    a = parse_config(BASE)
    b = parse_config(with_(["output_dir"], "elsewhere"))
    c = parse_config(with_(["seed"], 3))
    assert a.hash == b.hash != c.hash


@pytest.mark.parametrize(
    "path, value, match",
    [
        (["n"], 2, "n >= 3"),
        (["n"], 3.5, "integer"),
        (["mesh"], KeyError, "missing"),
        (["colour"], "blue", "unknown"),
        (["outer_bc"], "robin", "outer_bc"),
        (["mesh", "grading"], 1.5, "grading"),
        (["tau"], -1.0, "positive"),
        (["tau"], [], "non-empty"),
        (["warp"], {"perturbed": {"alpha": 1.0, "c": -3.0}}, "degenerates"),
        (["warp"], {"twisted": {}}, "unknown"),
        (["cross_section"], {"spectrum": {"R_h0": 2.0, "volume": 1.0, "eigenvalues": [1.0, 2.0]}}, "nu_0"),
        (["solver"], {"tol": 0}, "positive"),
        (["sweep"], {"M": [64.5]}, "integer"),
    ],
)
def test_invalid_configs_are_rejected(path, value, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(with_(path, value))


def test_bad_config_exits_with_usage_error(tmp_path, capsys):
    assert main(["mu-solve", str(write(tmp_path, with_(["n"], 2))), "--out", str(tmp_path)]) == 2
    assert "n >= 3" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["mu-solve", str(tmp_path / "broken.json")]) == 2
    assert main(["mu-solve", str(tmp_path / "missing.json")]) == 2


def test_mu_solve_writes_report_and_series(tmp_path):
    out = tmp_path / "out"
    assert main(["mu-solve", str(write(tmp_path, BASE)), "--out", str(out)]) == 0
    (report_path,) = out.glob("mu-solve-*.json")
    report = json.loads(report_path.read_text())
    assert report["passed"] and all(c["passed"] for c in report["checks"])
    assert all(row["config_hash"] == report["config_hash"] for row in report["rows"])
    assert set(report["environment"]) == {"package", "version", "numpy", "scipy", "seed"}
    for name in report["series"].values():
        with open(out / name) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["r", "u", "mode"] and len(rows) == 129


def test_failed_check_gives_exit_one(tmp_path):
    # one iteration cannot reach the tolerance on a curved model
    cfg = with_(["cross_section"], {"round_sphere": {"a": 0.8}})
    cfg.update(n=4, solver={"max_iters": 1})
    assert main(["mu-solve", str(write(tmp_path, cfg)), "--out", str(tmp_path)]) == 1
    (path,) = tmp_path.glob("mu-solve-*.json")
    report = json.loads(path.read_text())
    assert report["rows"][0]["status"] == "max_iter" and not report["passed"]


def test_reports_are_byte_identical_across_runs_and_pool_sizes(tmp_path):
    cfg = write(tmp_path, with_(["sweep"], {"a": [1.0, 2.0], "M": [64, 128, 256]}))
    blobs = []
    for workers in ("1", "2", "1"):
        out = tmp_path / f"w{workers}-{len(blobs)}"
        env = {"CONIC_ENTROPY_WORKERS": workers, "PATH": "/usr/bin:/bin"}
        subprocess.run([sys.executable, "-m", "conic_entropy", "lambda-sweep", str(cfg), "--out", str(out)],
                       check=False, env=env, capture_output=True, cwd=ROOT)
        blobs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert blobs[0] and blobs[0] == blobs[1] == blobs[2]


def test_bad_worker_count(tmp_path, monkeypatch):
    monkeypatch.setenv("CONIC_ENTROPY_WORKERS", "many")
    cfg = write(tmp_path, with_(["sweep"], {"M": [32, 64]}))
    assert main(["lambda-sweep", str(cfg), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("name", ["flat_dirichlet", "mu_flat", "mu_supercritical", "inequalities_perturbed"])
def test_shipped_configs_pass(tmp_path, name):
    assert main(["mu-solve" if name.startswith("mu") else ("inequalities" if name.startswith("ineq") else "lambda-sweep"),
                 str(ROOT / "configs" / f"{name}.json"), "--out", str(tmp_path)]) == 0
