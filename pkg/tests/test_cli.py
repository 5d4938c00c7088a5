import csv
import json

import pytest

from polympe.cli import main
from polympe.mesh import load_mesh
from polympe.outputs import RATE_COLUMNS


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_missing_config_is_input_error(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json")]) == 2


def test_malformed_config_is_input_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    assert main(["solve", "--config", str(path)]) == 2


def test_solve_zero_case(tmp_path):
    cfg = write_config(tmp_path, {
        "case": "zero",
        "mesh": {"family": "cartesian", "ny": 2},
        "degree": 1,
        "scheme": {"dt": 0.01, "n_steps": 4},
        "snapshot_stride": 2,
    })
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    snaps = sorted(out.glob("snapshot_*.csv"))
    assert len(snaps) == 2  # steps 2 and 4; the initial state is not written
    rows = list(csv.DictReader(open(snaps[-1])))
    assert all(float(r["p_E"]) == 0.0 for r in rows)
    assert (out / "manifest.json").exists()


def test_solve_demo_writes_vtk(tmp_path):
    cfg = write_config(tmp_path, {
        "case": "demo",
        "mesh": {"family": "cartesian", "ny": 2},
        "degree": 1,
        "params": {"preset": "brain", "alpha_j": {"E": 0.49}, "beta_ext": {"E": 0.0}},
        "scheme": {"dt": 0.01, "n_steps": 5},
        "snapshot_stride": 5,
    })
    out = tmp_path / "demo"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    vtk = (out / "snapshot_000005.vtk").read_text()
    assert vtk.startswith("# vtk DataFile Version 3.0")
    assert "DATASET POLYDATA" in vtk and "CELL_DATA" in vtk and "VECTORS d" in vtk


def test_convergence_command_and_determinism(tmp_path):
    doc = {
        "case": "steady",
        "convergence": {
            "m_values": [1],
            "meshes": [{"family": "cartesian", "ny": 2},
                       {"family": "cartesian", "ny": 4},
                       {"family": "cartesian", "ny": 8}],
        },
    }
    cfg = write_config(tmp_path, doc)
    out1, out2 = tmp_path / "c1", tmp_path / "c2"
    assert main(["convergence", "--config", cfg, "--out", str(out1), "--tol", "0.5"]) == 0
    assert main(["convergence", "--config", cfg, "--out", str(out2), "--tol", "0.5"]) == 0
    b1 = (out1 / "rates.csv").read_bytes()
    assert b1 == (out2 / "rates.csv").read_bytes()
    rows = list(csv.DictReader(open(out1 / "rates.csv")))
    assert list(rows[0]) == RATE_COLUMNS
    assert len(rows) == 3


def test_convergence_tolerance_failure(tmp_path):
    doc = {
        "case": "steady",
        "convergence": {
            "m_values": [1],
            "meshes": [{"family": "cartesian", "ny": 2},
                       {"family": "cartesian", "ny": 4},
                       {"family": "cartesian", "ny": 8}],
        },
    }
    cfg = write_config(tmp_path, doc)
    # an impossibly tight window must fail with exit code 1
    assert main(["convergence", "--config", cfg, "--out",
                 str(tmp_path / "cf"), "--tol", "1e-9"]) == 1


def test_convergence_needs_three_meshes(tmp_path):
    cfg = write_config(tmp_path, {
        "case": "steady",
        "convergence": {"m_values": [1], "meshes": [{"family": "cartesian", "ny": 2}]},
    })
    assert main(["convergence", "--config", cfg, "--out", str(tmp_path / "x")]) == 2


def test_verify_command(tmp_path):
    cfg = write_config(tmp_path, {
        "mesh": {"family": "cartesian", "ny": 2},
        "degree": 1,
        "verify": {"n_points": 15, "t": 0.2},
    })
    out = tmp_path / "v"
    assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
    text = (out / "verify.txt").read_text()
    assert "max residual" in text and "structural checks: PASS" in text
    assert "negative control" in text


def test_agglomerate_command(tmp_path):
    cfg = write_config(tmp_path, {
        "agglomeration": {
            "fine": {"fine_ny": 8, "jitter": 0.2, "seed": 0},
            "targets": [5, 5],
            "seed": 3,
            "output": "coarse.json",
        },
    })
    out = tmp_path / "agg"
    assert main(["agglomerate", "--config", cfg, "--out", str(out)]) == 0
    coarse = load_mesh(out / "coarse.json")
    assert coarse.n_elements == 10
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["partition_valid"] is True
    assert manifest["area_error"] < 1e-10
    assert (out / "quality.txt").exists()


def test_cell_means_of_projected_linear_field():
    import numpy as np
    from polympe.families import cartesian_two_domain, VERIFICATION_DIRICHLET
    from polympe.mesh import build_faces
    from polympe.outputs import cell_means
    from polympe.spaces import build_space, l2_project

    mesh = cartesian_two_domain(2)
    build_faces(mesh, VERIFICATION_DIRICHLET)
    space = build_space(mesh, 1)
    state = {f: np.zeros(space.sizes[f]) for f in space.fields}
    state["p:E"] = l2_project(space, "p:E", lambda p: p[:, 0] + 2 * p[:, 1])
    means = cell_means(space, state)
    for elem in space.el_ids:
        cx, cy = mesh.centroids[int(elem)]
        assert means["p:E"][int(elem), 0] == pytest.approx(cx + 2 * cy, rel=1e-12)
    for elem in space.f_ids:
        assert means["p:E"][int(elem), 0] == 0.0
