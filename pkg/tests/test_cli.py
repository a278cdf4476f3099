import csv
import json
import subprocess
import sys

import pytest

from onionwsn.cli import main
from onionwsn.topology import TopologyGraph


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    return list(csv.DictReader(line for line in text.splitlines() if not line.startswith("#")))


def test_query_run_grid(capsys):
    code, out, _ = run(["query", "run", "--topo", "grid", "--rows", "2", "--cols", "2", "--t", "2",
                        "--target", "3", "--seed", "9"], capsys)
    assert code == 0
    lines = [json.loads(l) for l in out.splitlines()]
    events = [l for l in lines if "hop" in l]
    assert len(events) == 5
    summary = lines[-1]["summary"]
    assert summary["recovered"] == summary["expected"] and summary["hops"] == 5


@pytest.mark.parametrize("argv", [["bogus"], ["analyze", "nothing"], ["analyze", "budget", "--nope"],
                                  [], ["topo"]])
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1 and err


def test_simulation_error_exit_2(capsys):
    code, _, err = run(["query", "run", "--topo", "grid", "--rows", "2", "--cols", "2", "--t", "3",
                        "--target", "2", "--seed", "1"], capsys)
    assert code == 2 and "path-selection-stuck" in err
    code, _, err = run(["query", "run", "--n", "100", "--t", "20", "--target", "2", "--seed", "1"], capsys)
    assert code == 2 and "packet-overflow" in err


def test_figure3_csv(tmp_path, capsys):
    out = tmp_path / "fig3.csv"
    assert main(["analyze", "figure3", "--t", "20", "--out", str(out), "--seed", "0"]) == 0
    text = out.read_text()
    assert text.startswith("# onionwsn analyze figure3 seed=0")
    rows = csv_rows(text)
    row = [r for r in rows if r["n"] == "100" and float(r["frac_infected"]) == 1.0][0]
    assert float(row["eq3_prob"]) == 0.05
    assert list(rows[0].keys()) == ["n", "z", "t", "frac_infected", "expected_known", "mc_known_mean",
                                    "mc_ci95", "eq3_prob", "empirical_prob"]


def test_no_timestamp_reproducible(tmp_path):
    paths = []
    for i in range(2):
        p = tmp_path / f"q{i}.jsonl"
        assert main(["query", "run", "--n", "100", "--t", "6", "--target", "8", "--seed", "4",
                     "--z", "10", "--no-timestamp", "--out", str(p)]) == 0
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]
    with_ts = tmp_path / "ts.csv"
    main(["analyze", "figure3", "--seed", "1", "--out", str(with_ts)])
    assert "# generated " in with_ts.read_text()


def test_default_seed_warns(capsys, caplog):
    code, out, _ = run(["analyze", "energy"], capsys)
    assert code == 0 and "seed=0" in out
    assert any("seed" in r.getMessage() for r in caplog.records)


def test_energy_and_budget(capsys):
    code, out, _ = run(["analyze", "energy", "--seed", "0"], capsys)
    vals = {r["quantity"]: float(r["value"]) for r in csv_rows(out)}
    assert vals["per_onion_sensor_mJ"] == 251.73
    assert vals["flood_over_basic"] >= 6
    code, out, err = run(["analyze", "budget", "--seed", "0"], capsys)
    assert code == 0 and "22" in err
    rows = {r["mode"]: int(r["max_t"]) for r in csv_rows(out)}
    assert rows == {"paper-exact": 20, "byte-aligned": 14}
    assert "# note:" in out


def test_sim_known_nodes(capsys):
    code, out, _ = run(["sim", "known-nodes", "--n", "1000", "--z", "100", "--t", "20",
                        "--trials", "10000", "--seed", "1"], capsys)
    assert code == 0
    row = csv_rows(out)[0]
    assert abs(float(row["mc_known_mean"]) - 3.8) / 3.8 < 0.05


def test_sim_privacy_and_pattern(capsys):
    code, out, _ = run(["sim", "privacy", "--n", "100", "--z", "20", "--t", "12",
                        "--trials", "2000", "--seed", "1"], capsys)
    assert code == 0 and float(csv_rows(out)[0]["eq3_prob"]) == pytest.approx(1 / (80 + 12 * 0.2))
    code, out, _ = run(["sim", "pattern", "--queries", "200", "--seed", "1", "--format", "jsonl"], capsys)
    assert code == 0
    rows = [json.loads(l) for l in out.splitlines()[1:]]
    assert rows[0]["leakage_pool"] < rows[0]["leakage_baseline"]


def test_topo_gen_and_reuse(tmp_path, capsys):
    topo = tmp_path / "g.json"
    assert main(["topo", "gen", "--kind", "grid", "--rows", "3", "--cols", "3", "--seed", "2",
                 "--out", str(topo)]) == 0
    g = TopologyGraph.from_json(topo.read_text())
    assert g.n == 9 and g.edge_count == 12
    code, out, _ = run(["query", "run", "--topo-file", str(topo), "--t", "3", "--target", "5",
                        "--seed", "1"], capsys)
    assert code == 0


def test_keygen(capsys):
    code, out, _ = run(["keygen", "--count", "3", "--vectors", "--seed", "5", "--no-timestamp"], capsys)
    doc = json.loads(out)
    assert code == 0 and len(doc["keys"]) == 3 and set(doc["keys"][0]) == {"x", "R", "key"}
    import oracles
    for k in doc["keys"]:
        assert oracles.ec_shared_key(int(k["x"], 16), bytes.fromhex(k["R"])).hex() == k["key"]


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "onionwsn", "analyze", "budget", "--seed", "0"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "paper-exact,16,16,920,20" in res.stdout
