import csv
import io
import json

import pytest

from kljn import config as cfgmod
from kljn.cli import campaign_configs, main
from kljn.report import strip_timestamp


def read_csv(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def design_value(path):
    return {r["row"]: float(r["value"]) for r in read_csv(path)}


def test_design_zero_power(tmp_path, capsys):
    rc = main(["design", "--mode", "zero-power", "--r-hb", "18000", "--r-la", "500", "--r-ha", "9000",
               "-o", str(tmp_path)])
    assert rc == 0
    assert "r_lb = 1000 ohm" in capsys.readouterr().out
    values = design_value(tmp_path / "design_zero-power.csv")
    assert values["R_LB"] == pytest.approx(1000.0)
    assert values["U_HB"] == pytest.approx(6.0, rel=0.01)


def test_design_match_parallel(tmp_path, capsys):
    rc = main(["design", "--mode", "match-parallel", "--r-ha", "2000", "--r-la", "100", "--r-lb", "90",
               "-o", str(tmp_path)])
    assert rc == 0
    assert design_value(tmp_path / "design_match-parallel.csv")["R_HB"] == pytest.approx(620.69, rel=1e-5)


def test_design_infeasible_exit_code(tmp_path, capsys):
    rc = main(["design", "--mode", "match-serial", "--r-la", "100", "--r-hb", "100", "--r-ha", "500",
               "-o", str(tmp_path)])
    assert rc == 2
    assert "InfeasibleMatch" in capsys.readouterr().err


def test_design_missing_input(tmp_path, capsys):
    rc = main(["design", "--mode", "match-serial", "--r-la", "100", "-o", str(tmp_path)])
    assert rc == 1


def test_design_from_config_json(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[design]\nmode = "match-serial"\nr_la = 500\nr_hb = 2500\nr_ha = 2000\n')
    assert main(["design", "-c", str(cfg), "--format", "json", "-o", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "design_match-serial.json").read_text())
    assert data["data"]["r_lb"] == 1000.0
    assert data["data"]["report"]["R_sHL"] == data["data"]["report"]["R_sLH"] == 3000.0
    assert data["seed"] == 0 and len(data["config_sha256"]) == 64


def test_tables_spot_cells(tmp_path, capsys):
    assert main(["tables", "-o", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "flagged" in out

    def cell(table, row, column):
        for r in read_csv(tmp_path / f"{table}.csv"):
            if r["row"] == row and r["column"] == column:
                return float(r["computed"])
        raise KeyError((table, row, column))

    assert cell("table2", "f_ucrHL", "2") == pytest.approx(239, rel=0.005)
    assert cell("table5", "T_iLH", "2") == pytest.approx(4.36e15, rel=0.01)
    assert cell("table8", "f_icrLH", "A") == pytest.approx(81930, rel=0.005)
    assert len(list(tmp_path.glob("table*.csv"))) == 8


def test_report_with_overrides(tmp_path, capsys):
    rc = main(["report", "--set", "quad.r_ha=10000", "--set", "quad.r_lb=5000", "--set", "quad.r_la=1000",
               "--set", "quad.r_hb=9000", "-o", str(tmp_path)])
    assert rc == 0
    values = design_value(tmp_path / "report.csv")
    assert values["f_ucrHL"] == pytest.approx(239, rel=0.005)


def test_report_requires_quad(tmp_path, capsys):
    assert main(["report", "-o", str(tmp_path)]) == 1


def test_output_dir_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("KLJN_OUTPUT_DIR", str(tmp_path / "envout"))
    assert main(["design", "--mode", "zero-power", "--r-hb", "9000", "--r-la", "1000", "--r-ha", "9000"]) == 0
    assert (tmp_path / "envout" / "design_zero-power.csv").exists()


SIM_CFG = """
seed = 4
[quad]
r_ha = 10000.0
r_lb = 5000.0
r_la = 1000.0
r_hb = 9000.0
[simulation]
n_bit_periods = 40
eve = "temperature"
"""


def test_simulate_deterministic(tmp_path, capsys):
    cfg = tmp_path / "sim.toml"
    cfg.write_text(SIM_CFG)
    outs = []
    for name in ("a", "b"):
        assert main(["simulate", "-c", str(cfg), "-o", str(tmp_path / name)]) == 0
        outs.append({f: strip_timestamp((tmp_path / name / f).read_text()) for f in ("session.json", "periods.csv")})
    assert outs[0] == outs[1]
    text = (tmp_path / "a" / "periods.csv").read_text()
    assert "seed=4" in text.splitlines()[1]
    assert main(["simulate", "-c", str(cfg), "--seed", "5", "-o", str(tmp_path / "c")]) == 0
    assert strip_timestamp((tmp_path / "c" / "session.json").read_text()) != outs[0]["session.json"]


def test_simulate_ambiguous_exit_code(tmp_path, capsys):
    rc = main(["simulate", "--set", "quad.r_ha=9000", "--set", "quad.r_lb=1000", "--set", "quad.r_la=1000",
               "--set", "quad.r_hb=9000", "--set", "simulation.mode=montecarlo",
               "--set", "simulation.periods=0.5", "-o", str(tmp_path)])
    assert rc == 3


ATTACK_CFG = """
seed = 2
[quad]
r_ha = 10000.0
r_lb = 5000.0
r_la = 1000.0
r_hb = 9000.0
[attack]
attack = "crossover"
channels = ["voltage"]
n_trials = 60
quads = [[9000.0, 1000.0, 1000.0, 9000.0], [10000.0, 5000.0, 1000.0, 9000.0]]
"""


def test_attack_campaign_grid(tmp_path, capsys):
    cfg = tmp_path / "attack.toml"
    cfg.write_text(ATTACK_CFG)
    assert main(["attack", "-c", str(cfg), "-o", str(tmp_path / "a")]) == 0
    rows = read_csv(tmp_path / "a" / "summary.csv")
    assert [r["point"][:3] for r in rows] == ["q00", "q01"]
    classical, row2 = rows
    assert float(classical["ci_low"]) <= 0.5 <= float(classical["ci_high"])
    assert float(row2["ci_low"]) > 0.5
    trials = (tmp_path / "a" / f"trials_{row2['point']}.jsonl").read_text().splitlines()
    assert len(trials) == 2 + 60
    first = json.loads(trials[2])
    assert {"seed", "true_state", "statistics", "verdict", "margin"} <= set(first)

    assert main(["attack", "-c", str(cfg), "--jobs", "2", "-o", str(tmp_path / "b")]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert strip_timestamp(f.read_text()) == strip_timestamp((tmp_path / "b" / f.name).read_text())


@pytest.mark.slow
def test_attack_bandwidth_sweep_trend(tmp_path, capsys):
    base = cfgmod.load_config(None, ["quad.r_ha=10000", "quad.r_lb=5000", "quad.r_la=1000", "quad.r_hb=9000",
                                     "attack.attack=temperature", "attack.n_trials=300",
                                     "attack.bandwidths=[221.0, 55.25, 13.8125]"])
    configs = campaign_configs(base)
    assert len(configs) == 3
    assert main(["attack", "--set", "quad.r_ha=10000", "--set", "quad.r_lb=5000", "--set", "quad.r_la=1000",
                 "--set", "quad.r_hb=9000", "--set", "attack.attack=temperature",
                 "--set", "attack.n_trials=300", "--set", "attack.bandwidths=[221.0, 55.25, 13.8125]",
                 "-o", str(tmp_path)]) == 0
    rows = sorted(read_csv(tmp_path / "summary.csv"), key=lambda r: -float(r["bandwidth_b"]))
    p = [float(r["p"]) for r in rows]
    lo = [float(r["ci_low"]) for r in rows]
    hi = [float(r["ci_high"]) for r in rows]
    for i in range(2):
        assert p[i + 1] <= p[i] or lo[i + 1] <= hi[i]


def test_frequency_scale_config():
    cfg = cfgmod.load_config(None, ["cable.frequency_scale=1000", "bandwidth_b=1000"])
    assert cfgmod.bandwidth(cfg) == pytest.approx(1.0)
    cable = cfgmod.cable(cfg)
    assert cable.cap_per_m == pytest.approx(1e-7) and cable.ind_per_m == pytest.approx(0.7e-3)


def test_config_hash_stable():
    a = cfgmod.load_config(None, ["seed=3"])
    b = cfgmod.load_config(None, ["seed=3"])
    c = cfgmod.load_config(None, ["seed=4"])
    assert cfgmod.config_hash(a) == cfgmod.config_hash(b) != cfgmod.config_hash(c)


def test_bad_override():
    with pytest.raises(cfgmod.InvalidInput):
        cfgmod.apply_override({}, "no_equals_sign")
