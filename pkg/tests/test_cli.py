import csv
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from levicore import cli, core
from levicore.config import from_dict, load
from levicore.errors import InvariantBreach, PreconditionError
from levicore.schemas import SCHEMAS

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small_circle(tmp_path, **extra):
    d = {
        "domain": {"kind": "hartogs", "name": "circle",
                   "K": {"kind": "circle", "center": [0.0, 0.0], "radius": 0.25}, "h": 2.0**-9},
        "sampling": {"n_z": 64, "n_theta": 4, "k_samples": 1000},
        "delta_window": [4, 10],
        "output_dir": str(tmp_path / "out"),
    }
    d.update(extra)
    p = tmp_path / "circle_small.json"
    p.write_text(json.dumps(d))
    return p


def run(args, out):
    code = cli.main([*args, "--out", str(out)])
    out = Path(out)
    return code, ({p.name: p for p in out.iterdir()} if out.exists() else {})


def check_schema(path):
    doc = json.loads(Path(path).read_text())
    jsonschema.validate(doc, SCHEMAS[Path(path).name])
    return doc


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_classify_ball(tmp_path):
    code, files = run(["classify", "--config", str(CONFIGS / "ball.json")], tmp_path)
    assert code == 0
    summary = check_schema(files["classify_summary.json"])
    assert summary["fraction_strong"] == 1.0
    rows = read_csv(files["classification.csv"])
    assert rows[0] == ["index", "z_re[1]", "z_im[1]", "theta[rad]", "w_re[1]", "w_im[1]", "levi_min[1]",
                       "levi_max[1]", "class", "on_K", "dist_K[1]", "band", "lattice"]
    assert len(rows) - 1 == summary["n_samples"] >= 1000
    # .17g floats round-trip exactly
    assert all(repr(float(r[1])) == repr(float(repr(float(r[1])))) for r in rows[1:50])
    assert {r[8] for r in rows[1:]} == {"strongly_pseudoconvex"}


def test_core_ball_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["core", "--config", str(CONFIGS / "ball.json")], a)[0] == 0
    assert run(["core", "--config", str(CONFIGS / "ball.json")], b)[0] == 0
    for name in ("chain.json", "stages.csv", "partition.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    doc = check_schema(a / "chain.json")
    assert doc["core_size"] == 0 and doc["corollary"]["reason"] == "empty core"
    labels = {r[5] for r in read_csv(a / "partition.csv")[1:]}
    assert labels == {"K_-1"}


def test_core_small_circle(tmp_path):
    code, files = run(["core", "--config", str(small_circle(tmp_path))], tmp_path / "o")
    assert code == 0
    doc = check_schema(files["chain.json"])
    assert doc["stabilized"] and doc["core_size"] == 0
    assert [s["size"] for s in doc["stages"]][-1] == 0
    rows = read_csv(files["stages.csv"])
    assert rows[0] == ["stage", "index", "dim", "tangent_dim", "max_cosine[1]", "next_dim"]
    assert all(r[5] == "0" for r in rows[1:] if r[0] == "0")


def test_dims_small_circle(tmp_path):
    code, files = run(["dims", "--config", str(small_circle(tmp_path))], tmp_path / "o")
    assert code == 0
    doc = check_schema(files["dims.json"])
    assert doc["heuristic"] is True
    assert abs(doc["report"]["dimension"] - 2) < 0.15
    assert doc["corollary"]["verdict"].startswith("measure-zero route applies")
    assert read_csv(files["loglog.csv"])[0] == ["delta[1]", "count", "log_inv_delta", "log_count"]


def test_dims_ball_has_no_support(tmp_path):
    code, files = run(["dims", "--config", str(CONFIGS / "ball.json")], tmp_path)
    assert code == 0
    doc = check_schema(files["dims.json"])
    assert doc["report"] is None and doc["corollary"]["core_size"] == 0


def test_verify_example_ball_rejected(tmp_path):
    code, files = run(["verify-example", "--config", str(CONFIGS / "ball.json")], tmp_path)
    assert code == 2
    err = check_schema(files["error.json"])
    assert err["exit_code"] == 2 and err["error"] == "PreconditionError"


def test_witness_pass(tmp_path):
    code, files = run(["witness", "--config", str(CONFIGS / "witness_two_points.json")], tmp_path)
    assert code == 0
    doc = check_schema(files["witness.json"])
    assert doc["verdict"] == "pass" and doc["M"] == 100
    assert doc["neighborhood"]["radii"] == [0.1, 0.1]


def test_witness_rejected(tmp_path):
    d = json.loads((CONFIGS / "witness_two_points.json").read_text())
    d["witness"]["M"] = 50
    p = tmp_path / "w.json"
    p.write_text(json.dumps(d))
    code, files = run(["witness", "--config", str(p)], tmp_path / "o")
    assert code == 2
    doc = check_schema(files["witness.json"])
    assert doc["verdict"] == "rejected" and doc["min_M"] == pytest.approx(64)
    check_schema(files["error.json"])


def test_witness_grid_file(tmp_path):
    xs = [round(float(v), 10) for v in np.arange(-0.2, 0.2001, 0.01)]
    with open(tmp_path / "lam.csv", "w") as fh:
        fh.write("x,y,lambda,hess_re,hess_im\n")
        for x in xs:
            for y in xs:
                fh.write(f"{x!r},{y!r},{0.25 + x * x + y * y!r},1.0,0.0\n")
    cfg = {"domain": {"kind": "builtin", "name": "ball"},
           "witness": {"K": {"kind": "finite", "points": [[0.0, 0.0]]}, "M": 1, "lambda_file": "lam.csv"}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    code, files = run(["witness", "--config", str(tmp_path / "c.json")], tmp_path / "o")
    assert code == 0
    doc = check_schema(files["witness.json"])
    assert doc["verdict"] == "pass" and doc["neighborhood"]["kind"] == "grid"


@pytest.mark.parametrize(
    "patch",
    [
        {"bogus": 1},
        {"sampling": {"n_z": 100, "n_theta": 4}},
        {"sampling": {"n_z": 64, "n_theta": 3}},
        {"seed": -1},
        {"seed": 2**64},
        {"max_iter": 0},
        {"tolerances": {"eps_rel": 0}},
        {"tolerances": {"scale_window": [5, 3]}},
        {"domain": {"kind": "hartogs", "name": "x"}},
        {"domain": {"kind": "builtin", "name": "torus"}},
        {"domain": {"kind": "hartogs", "name": "x", "K": {"kind": "circle"}, "h": 2.0**-9}},
    ],
)
def test_config_validation(tmp_path, patch):
    d = json.loads((CONFIGS / "ball.json").read_text())
    d.update(patch)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    with pytest.raises(PreconditionError):
        cfg = load(p)
        cfg.domain.build()
    code, files = run(["classify", "--config", str(p)], tmp_path / "o")
    assert code == 2


def test_missing_config_exit_2(tmp_path, capsys):
    assert cli.main(["classify", "--config", str(tmp_path / "none.json")]) == 2
    assert "PreconditionError" in capsys.readouterr().err


def test_seed_override(tmp_path):
    assert run(["classify", "--config", str(CONFIGS / "ball.json"), "--seed", str(2**64 - 1)], tmp_path)[0] == 0
    assert run(["classify", "--config", str(CONFIGS / "ball.json"), "--seed", str(2**64)], tmp_path / "x")[0] == 2


def test_shipped_configs_valid():
    for p in sorted(CONFIGS.glob("*.json")):
        cfg = load(p)
        assert from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_non_stabilization_exit_3(tmp_path, monkeypatch):
    real = core.derive_next

    def shrinking(cloud, analysis, params=None, form="direct", estimates=None):
        # drop one point per step so consecutive stages never agree
        nxt, rec = real(cloud, analysis, params, form, estimates)
        keep = cloud.index[1:]
        return core.SupportCloud(cloud.stage + 1, keep, {int(i): cloud.bases[int(i)] for i in keep},
                                 cloud.resolution), rec

    monkeypatch.setattr(core, "derive_next", shrinking)
    code, files = run(["core", "--config", str(small_circle(tmp_path, max_iter=2))], tmp_path / "o")
    assert code == 3
    err = check_schema(files["error.json"])
    assert err["error"] == "NonStabilizationError"
    partial = check_schema(files["chain.json"])
    assert partial["stabilized"] is False and len(partial["stages"]) == 3


def test_invariant_breach_exit_4(tmp_path, monkeypatch):
    def broken(chain, analysis=None):
        raise InvariantBreach("labels overlap")

    monkeypatch.setattr(cli, "partition_boundary", broken)
    code, files = run(["core", "--config", str(CONFIGS / "ball.json")], tmp_path)
    assert code == 4
    assert check_schema(files["error.json"])["exit_code"] == 4
