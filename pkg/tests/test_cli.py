import csv
import json

import jsonschema
import pytest

from qubitdist import cli, reports


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
    return tmp_path


def load(path):
    return json.loads(path.read_text())


def test_dephasing_example(outdir):
    assert cli.main(["dephasing", "--phi-h", "1.0", "--phi-v", "2.5", "--alpha", "0.6", "--beta", "0.8", "-q"]) == 0
    rep = load(outdir / "dephasing.json")
    reports.validate_report(rep)
    assert rep["result"]["fidelity"] == pytest.approx(1.0, abs=1e-12)
    assert rep["result"]["parity_factor"] == pytest.approx(0.5, abs=1e-12)
    assert rep["config"]["noise.phi_h"] == 1.0 and rep["config"]["source.beta"] == 0.8
    assert rep["schema_version"] == reports.SCHEMA_VERSION


def test_rotation_haar_small(outdir):
    assert cli.main(["rotation", "--haar", "--trials", "500", "--seed", "7", "--eta", "1.0", "-q"]) == 0
    res = load(outdir / "rotation.json")["result"]
    assert res["trials"] == 500 and res["noise_kind"] == "haar-rotation"
    assert abs(res["mean_parity_factor"] - 0.125) < 5 * res["stderr_parity_factor"]


def test_same_config_same_report(outdir):
    args = ["rotation", "--product-su2", "--jitter", "0.2", "--trials", "50", "--seed", "3", "-q"]
    cli.main(args + ["--out", str(outdir / "a.json")])
    cli.main(args + ["--out", str(outdir / "b.json"), "--workers", "2"])
    a, b = load(outdir / "a.json"), load(outdir / "b.json")
    for r in (a, b):
        r.pop(reports.TIMESTAMP_FIELD)
    b["config"]["run.workers"] = 1
    assert a == b


def test_config_echo_reruns_exactly(outdir):
    cli.main(["bb84", "--rounds", "300", "--seed", "5", "--noise", "product-su2", "-q", "--out", str(outdir / "a.json")])
    cli.main(["bb84", "--config", str(outdir / "a.json"), "-q", "--out", str(outdir / "b.json")])
    a, b = (outdir / n for n in ("a.json", "b.json"))
    strip = lambda p: [l for l in p.read_text().splitlines() if reports.TIMESTAMP_FIELD not in l]
    assert strip(a) == strip(b)


def test_key_value_file_and_flag_precedence(outdir):
    cfg = outdir / "run.cfg"
    cfg.write_text("# dephasing run\nnoise.phi_h = 0.3\ndetector.eta=0.5\nrun.seed = 11\n")
    assert cli.main(["dephasing", "--config", str(cfg), "--eta", "0.8", "-q"]) == 0
    c = load(outdir / "dephasing.json")["config"]
    assert c["noise.phi_h"] == 0.3 and c["detector.eta"] == 0.8 and c["run.seed"] == 11


def test_csv_aggregate_and_per_trial(outdir):
    assert cli.main(["rotation", "--haar", "--trials", "25", "--format", "csv", "-q"]) == 0
    rows = list(csv.DictReader(open(outdir / "rotation.csv")))
    assert len(rows) == 1 and "mean_parity_factor" in rows[0] and "config.noise.kind" in rows[0]
    assert cli.main(["rotation", "--haar", "--trials", "25", "--format", "csv", "--per-trial", "-q"]) == 0
    rows = list(csv.DictReader(open(outdir / "rotation.csv")))
    assert len(rows) == 25 and rows[3]["trial"] == "3"


def test_bb84_log(outdir):
    log = outdir / "rounds.csv"
    assert cli.main(["bb84", "--rounds", "200", "--log", str(log), "-q"]) == 0
    assert len(log.read_text().splitlines()) == 201
    assert load(outdir / "bb84.json")["result"]["rounds"] == 200


def test_stats_grid_csv(outdir):
    assert cli.main(["stats", "--grid", "4", "--format", "csv", "-q"]) == 0
    lines = (outdir / "stats.csv").read_text().splitlines()
    assert lines[0] == "nu,mu,p11,pmul,bound,ratio,condition_met" and len(lines) == 17
    assert cli.main(["stats", "--source", "pdc", "--pair-prob", "0.01", "-q"]) == 0
    assert load(outdir / "stats.json")["result"]["rows"][0]["condition_met"] is True


def test_multiphoton(outdir):
    assert cli.main(["multiphoton", "--source", "fock", "--n-ref", "2", "--n-sig", "0", "--alpha", "0.6",
                     "--beta", "0.8j", "-q"]) == 0
    assert load(outdir / "multiphoton.json")["result"]["false_accept_probability"] > 0


def test_verify_subset(outdir, capsys):
    assert cli.main(["verify", "--only", "2,7"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] 2." in out and "[PASS] 7." in out
    assert load(outdir / "verify.json")["result"]["passed"] is True


@pytest.mark.parametrize("args,code,needle", [
    (["dephasing", "--set", "noise.bogus=1"], 2, "noise.bogus"),
    (["dephasing", "--set", "bb84.rounds=5"], 2, "bb84.rounds"),
    (["dephasing", "--eta", "abc"], 2, "detector.eta"),
    (["dephasing", "--eta", "1.5"], 3, "detector.eta"),
    (["dephasing", "--alpha", "0.6"], 3, "source.alpha"),
    (["rotation", "--delta1", "0.5"], 3, "noise.delta1"),
    (["stats", "--source", "pdc", "--pair-prob", "0.5"], 3, "source.pair_prob"),
    (["rotation", "--haar", "--trials", "0"], 3, "run.trials"),
    (["verify", "--only", "12"], 2, "verify.only"),
    (["dephasing", "--nonsense"], 2, ""),
])
def test_error_exit_codes(outdir, capsys, args, code, needle):
    assert cli.main(args + ["-q"]) == code
    assert needle in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["stats", "-q", "--out", str(blocker / "x.json")]) == 4
    assert str(blocker) in capsys.readouterr().err


def test_schema_rejects_bad_report():
    rep = reports.build_report("stats", {}, {"rows": []})
    with pytest.raises(jsonschema.ValidationError):
        reports.validate_report(rep)
    rep = reports.build_report("stats", {"a": 1}, {"rows": [{"source": "coherent", "p11": 0.1, "pmul": 0.2,
                                                             "ratio": 0.5, "condition_met": False}]})
    reports.validate_report(rep)


def test_clean_handles_special_values():
    assert reports._clean({"x": float("inf"), "z": 1 + 2j, "t": (1, 2)}) == {"x": "inf", "z": [1.0, 2.0], "t": [1, 2]}
