import json
import subprocess
import sys

import numpy as np
import pytest

from matchkit.data import CausalDataset, PointSet
from matchkit.errors import BadTreatmentValue, EmptySample, MalformedInput
from matchkit.io import (
    dumps,
    read_causal_csv,
    read_points_csv,
    write_causal_csv,
    write_points_csv,
)
from matchkit.cli import main


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- CSV readers ---------------------------------------------------------------

def test_read_points_basic(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x1\n0\n1\n2\n")
    ps = read_points_csv(str(p))
    assert ps.n == 3 and ps.d == 1
    assert ps.points[:, 0].tolist() == [0.0, 1.0, 2.0]


def test_read_points_wrong_arity(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x1\n0,5\n")
    with pytest.raises(MalformedInput, match="row 2"):
        read_points_csv(str(p))


def test_read_points_empty_data(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x1\n")
    with pytest.raises(EmptySample):
        read_points_csv(str(p))


def test_read_points_bad_header(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("a,b\n0,1\n")
    with pytest.raises(MalformedInput, match="header"):
        read_points_csv(str(p))


def test_read_points_non_numeric(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x1\nfoo\n")
    with pytest.raises(MalformedInput, match="row 2"):
        read_points_csv(str(p))


def test_read_causal_basic(tmp_path):
    p = tmp_path / "data.csv"
    p.write_text("x1,d,y\n0,1,5\n2.5,1,7\n1,0,1\n3.5,0,3\n")
    ds = read_causal_csv(str(p))
    assert (ds.n, ds.n0, ds.n1) == (4, 2, 2)
    assert ds.outcomes.tolist() == [5.0, 7.0, 1.0, 3.0]


def test_read_causal_bad_treatment(tmp_path):
    p = tmp_path / "data.csv"
    p.write_text("x1,d,y\n0,2,5\n")
    with pytest.raises(BadTreatmentValue):
        read_causal_csv(str(p))


def test_read_causal_missing_y(tmp_path):
    p = tmp_path / "data.csv"
    p.write_text("x1,d\n0,1\n")
    with pytest.raises(MalformedInput):
        read_causal_csv(str(p))


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    ps = PointSet(rng.normal(size=(10, 3)))
    f = tmp_path / "r.csv"
    write_points_csv(str(f), ps)
    back = read_points_csv(str(f))
    assert np.array_equal(back.points, ps.points)
    ds = CausalDataset(PointSet(rng.normal(size=(8, 2))),
                       np.array([0, 1] * 4), rng.normal(size=8))
    g = tmp_path / "c.csv"
    write_causal_csv(str(g), ds)
    back_ds = read_causal_csv(str(g))
    assert np.array_equal(back_ds.covariates.points, ds.covariates.points)
    assert np.array_equal(back_ds.outcomes, ds.outcomes)


# --- JSON emission ---------------------------------------------------------------

def test_dumps_round_trips_doubles():
    vals = [0.1, 1 / 3, 1.5, np.pi, 1e-300, 123456789.123456789]
    text = dumps({"values": vals})
    parsed = json.loads(text)
    assert parsed["values"] == vals  # bit-exact after the 17-digit round trip


def test_dumps_types():
    assert dumps(None) == "null"
    assert dumps(True) == "true"
    assert dumps([1, 2]) == "[1,2]"
    assert dumps({"a": "b\n"}) == '{"a":"b\\n"}'
    assert json.loads(dumps(float("inf"))) == float("inf")


# --- CLI -------------------------------------------------------------------------

@pytest.fixture
def example_files(tmp_path):
    x = tmp_path / "x.csv"
    x.write_text("x1\n0\n1\n2\n")
    z = tmp_path / "z.csv"
    z.write_text("x1\n0.4\n1.6\n")
    data = tmp_path / "data.csv"
    data.write_text("x1,d,y\n0,1,5\n2.5,1,7\n1,0,1\n3.5,0,3\n")
    return {"x": str(x), "z": str(z), "data": str(data)}


def test_cli_ratio_example(example_files, capsys):
    code, out, _ = run_cli(["ratio", "--x", example_files["x"],
                            "--z", example_files["z"], "--m", "1"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["result"]["values"] == [1.5, 0.0, 1.5]
    assert payload["result"]["m"] == 1
    assert payload["manifest"]["command"] == "ratio"
    assert "x" in payload["manifest"]["inputs"]


def test_cli_ate_bc_example(example_files, capsys):
    code, out, _ = run_cli(["ate", "--data", example_files["data"],
                            "--method", "bc", "--m", "1", "--degree", "0"],
                           capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["result"]["tau_hat"] == pytest.approx(4.0)
    assert payload["result"]["sigma2_hat"] == pytest.approx(4.0)


def test_cli_ate_matching(example_files, capsys):
    code, out, _ = run_cli(["ate", "--data", example_files["data"],
                            "--method", "matching", "--m", "1"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["result"]["tau_hat"] == 4.0
    assert payload["result"]["sigma2_hat"] is None


def test_cli_kl(example_files, capsys):
    code, out, _ = run_cli(["kl", "--x", example_files["x"],
                            "--z", example_files["z"], "--m", "1"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert "value" in payload["result"]


def test_cli_ratio_at(example_files, tmp_path, capsys):
    pts = tmp_path / "pts.csv"
    pts.write_text("x1\n0.45\n")
    code, out, _ = run_cli(["ratio-at", "--x", example_files["x"],
                            "--z", example_files["z"], "--points", str(pts),
                            "--baseline", "noshad", "--m", "3"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["result"]["at_points"] == [0.5]
    assert payload["result"]["at_sample"] is None


def test_cli_m_overrides_alpha(example_files, capsys):
    code, out, _ = run_cli(["ratio", "--x", example_files["x"],
                            "--z", example_files["z"], "--m", "1",
                            "--alpha", "2.0"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["result"]["m"] == 1
    assert "warning" in payload["result"]


def test_cli_unknown_subcommand_exit_2(capsys):
    assert main(["frobnicate"]) == 2


def test_cli_data_error_exit_3(example_files, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1\nfoo\n")
    code, out, err = run_cli(["ratio", "--x", str(bad),
                              "--z", example_files["z"], "--m", "1"], capsys)
    assert code == 3
    assert out == ""
    assert json.loads(err)["error"]["code"] == "malformed_input"


def test_cli_invalid_m_exit_3(example_files, capsys):
    code, _, err = run_cli(["ratio", "--x", example_files["x"],
                            "--z", example_files["z"], "--m", "9"], capsys)
    assert code == 3
    assert json.loads(err)["error"]["code"] == "invalid_m"


def test_cli_simulate_inline_spec(capsys):
    code, out, _ = run_cli([
        "simulate", "--task", "kl-bias",
        "--spec", '{"family": "uniform-subinterval", "d": 1, "params": {"b": 0.5}}',
        "--n-grid", "200", "--reps", "3", "--seed", "5",
    ], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["result"]["task"] == "kl-bias"
    assert len(payload["result"]["cells"]) == 1


def test_cli_bench(capsys):
    code, out, _ = run_cli(["bench", "--n-grid", "400,800", "--d", "2",
                            "--m", "3", "--seed", "1"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert len(payload["result"]["rows"]) == 2
    assert len(payload["result"]["ratios"]) == 1


def strip_wall_time(payload_text: str):
    payload = json.loads(payload_text)
    payload["manifest"].pop("wall_time_s")
    return payload


def test_cli_determinism_bytes(example_files, tmp_path):
    rng = np.random.default_rng(3)
    rows = ["x1,d,y"]
    treatments = np.tile([0, 1], 20)
    for t in treatments:
        rows.append(f"{rng.normal():.17g},{t},{rng.normal():.17g}")
    data = tmp_path / "big.csv"
    data.write_text("\n".join(rows) + "\n")
    argv = ["ate", "--data", str(data), "--method", "crossfit",
            "--m", "2", "--degree", "0", "--folds", "2", "--seed", "7"]
    outs = []
    for _ in range(2):
        proc = subprocess.run([sys.executable, "-m", "matchkit"] + argv,
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(proc.stdout)
    from matchkit.io import dumps as mk_dumps
    a, b = (mk_dumps(strip_wall_time(o)) for o in outs)
    assert a == b
    # the result subtree is byte-identical raw
    ra = outs[0][outs[0].index('"result"'):]
    rb = outs[1][outs[1].index('"result"'):]
    assert ra == rb
