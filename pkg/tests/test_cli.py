import json
import math

import pytest

from coded_offload.cli import SolveReportRecord, main
from coded_offload.config import build_instance, config_from_dict, load_config, parse_quantity
from coded_offload.errors import ConfigError
from coded_offload.scenarios import ScenarioSet, write_scenarios

TOY = """
[network]
uav_count = 2
bs_count = 1

[bs]
workers = 3

[scenarios]
failure_prob = 0.3
shortfall = 1
"""


@pytest.fixture
def toy_config(tmp_path):
    p = tmp_path / "toy.toml"
    p.write_text(TOY)
    return str(p)


def read(path):
    return path.read_bytes()


# -- configuration -----------------------------------------------------------------

def test_defaults_are_reference_values(default_config):
    c = default_config
    assert c.coding.m == 2 and c.coding.N == 1000
    assert c.uav.cpu == 1e9 and c.uav.bandwidth == 2e6 and c.uav.tx_power == 0.032
    assert c.bs.cpu == 20e9 and c.bs.workers == 15 and c.bs.service_cost == 0.2
    assert c.radio.noise_power == 1e-13 and c.radio.reference_gain == 1e-6
    assert (c.costs.alpha1, c.costs.alpha2) == (0.6, 0.0004)
    assert c.rotorcraft.weight == 10.2
    assert (c.network.uav_count, c.network.bs_count) == (10, 2)


def test_unit_strings():
    assert parse_quantity("-100 dBm", "power", "x") == pytest.approx(1e-13, rel=1e-12)
    assert parse_quantity("-60 dB", "ratio", "x") == pytest.approx(1e-6, rel=1e-12)
    assert parse_quantity("2 MHz", "frequency", "x") == 2e6
    assert parse_quantity("32 mW", "power", "x") == pytest.approx(0.032)
    with pytest.raises(ConfigError):
        parse_quantity("2 MHz", "power", "x")
    with pytest.raises(ConfigError):
        parse_quantity("2 parsecs", None, "x")


def test_config_with_units_matches_defaults():
    cfg = config_from_dict({"radio": {"noise_power": "-100 dBm", "reference_gain": "-60 dB"},
                            "uav": {"bandwidth": "2 MHz"}})
    assert cfg.radio.noise_power == pytest.approx(1e-13, rel=1e-12)
    assert cfg.uav.bandwidth == 2e6


def test_negative_bandwidth_names_field():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"uav": {"bandwidth": -1}})
    assert "uav.bandwidth" in str(err.value)


def test_unknown_key_and_section():
    with pytest.raises(ConfigError, match="uav.colour"):
        config_from_dict({"uav": {"colour": "red"}})
    with pytest.raises(ConfigError, match="unknown section"):
        config_from_dict({"weather": {}})


def test_file_and_generator_are_exclusive():
    with pytest.raises(ConfigError, match="not both"):
        config_from_dict({"scenarios": {"file": "a.csv", "failure_prob": 0.1}})


def test_config_hash_tracks_content():
    a, b = load_config(None), load_config(None)
    assert a.config_hash() == b.config_hash()
    assert a.replace("uav", cpu=2e9).config_hash() != a.config_hash()
    assert len(a.config_hash()) == 16


def test_bad_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[uav\n")
    with pytest.raises(ConfigError):
        load_config(p)


# -- solve -------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["dip", "sip", "evf"])
def test_solve_writes_outputs(tmp_path, mode, capsys):
    assert main(["solve", "--mode", mode, "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / f"solve_{mode}.json").read_text())
    assert rec["method"] == mode.upper()
    assert math.isclose(rec["total_cost"], rec["stage1_cost"] + rec["expected_recourse_cost"], rel_tol=1e-9)
    csv = (tmp_path / f"solve_{mode}_allocation.csv").read_text().splitlines()
    assert csv[0].startswith("uav,local,offload_bs1,offload_bs2")
    assert len(csv) == 11
    assert "total cost" in capsys.readouterr().out


def test_dip_zero_shortfall_equals_sip_without_failures(tmp_path, default_instance):
    scen = tmp_path / "calm.csv"
    write_scenarios(ScenarioSet.no_failure(default_instance.uav_count), scen)
    assert main(["solve", "--mode", "dip", "--shortfall", "0", "--out", str(tmp_path / "d")]) == 0
    assert main(["solve", "--mode", "sip", "--scenario-file", str(scen), "--out", str(tmp_path / "s")]) == 0
    d = json.loads((tmp_path / "d" / "solve_dip.json").read_text())
    s = json.loads((tmp_path / "s" / "solve_sip.json").read_text())
    assert d["objective_fixed"] == s["objective_fixed"]
    assert (d["local"], d["offload"]) == (s["local"], s["offload"])


def test_oracle_matches_sip_on_toy(tmp_path, toy_config):
    assert main(["solve", "--config", toy_config, "--mode", "oracle", "--out", str(tmp_path / "o")]) == 0
    assert main(["solve", "--config", toy_config, "--mode", "sip", "--out", str(tmp_path / "s")]) == 0
    o = json.loads((tmp_path / "o" / "solve_oracle.json").read_text())
    s = json.loads((tmp_path / "s" / "solve_sip.json").read_text())
    for key in ("objective_fixed", "local", "offload", "recourse"):
        assert o[key] == s[key]
    assert read(tmp_path / "o" / "solve_oracle_allocation.csv") == read(tmp_path / "s" / "solve_sip_allocation.csv")


def test_oracle_over_cap_exits_3(tmp_path, capsys):
    assert main(["solve", "--mode", "oracle", "--out", str(tmp_path)]) == 3
    assert "cap" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[uav]\nbandwidth = -5\n")
    assert main(["solve", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "uav.bandwidth" in capsys.readouterr().err


def test_bad_scenario_file_exits_2(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("p,F_1,A_1\n0.5,1,1\n")
    assert main(["validate-scenarios", "--scenario-file", str(p)]) == 2


def test_bad_shortfall_flag_exits_2(tmp_path):
    assert main(["solve", "--mode", "dip", "--shortfall", "x", "--out", str(tmp_path)]) == 2
    assert main(["solve", "--mode", "dip", "--shortfall", "1,2", "--out", str(tmp_path)]) == 2


def test_record_round_trip(tmp_path):
    assert main(["solve", "--mode", "sip", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "solve_sip.json").read_text()
    assert SolveReportRecord.from_dict(json.loads(text)).dumps() == text


def test_timestamp_follows_source_date_epoch(tmp_path, monkeypatch, toy_config):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert main(["solve", "--config", toy_config, "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "solve_sip.json").read_text())
    assert rec["timestamp"] == "1970-01-01T00:00:00+00:00"


def test_solve_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["solve", "--mode", "sip", "--out", str(tmp_path / d)]) == 0
    for name in ("solve_sip.json", "solve_sip_allocation.csv", "solve_sip_summary.txt"):
        assert read(tmp_path / "a" / name) == read(tmp_path / "b" / name)


def test_bits_per_symbol_changes_costs(tmp_path):
    main(["solve", "--out", str(tmp_path / "a")])
    main(["solve", "--bits-per-symbol", "32", "--out", str(tmp_path / "b")])
    a = json.loads((tmp_path / "a" / "solve_sip.json").read_text())
    b = json.loads((tmp_path / "b" / "solve_sip.json").read_text())
    assert a["config_hash"] != b["config_hash"]
    assert b["total_cost"] < a["total_cost"]


# -- other subcommands -------------------------------------------------------------

def test_experiment_writes_files(tmp_path, toy_config, capsys):
    assert main(["experiment", "cost-structure", "--config", toy_config, "--out", str(tmp_path)]) == 0
    table = (tmp_path / "cost_structure.csv").read_text()
    assert table.startswith("# config_hash: ")
    assert (tmp_path / "cost_structure_plot.dat").exists()
    assert "sip_total" in capsys.readouterr().out


def test_validate_scenarios_export(tmp_path, capsys):
    out = tmp_path / "exp.csv"
    assert main(["validate-scenarios", "--export", str(out)]) == 0
    text = capsys.readouterr().out
    assert "1024 scenarios over 10 UAVs" in text
    assert main(["validate-scenarios", "--scenario-file", str(out)]) == 0


def test_show_config(capsys):
    assert main(["show-config"]) == 0
    out = capsys.readouterr().out
    first, body = out.split("\n", 1)
    assert first.startswith("# config_hash: ")
    assert json.loads(body)["coding"]["m"] == 2


def test_build_instance_from_explicit_positions():
    cfg = config_from_dict({"network": {"uav_count": 1, "bs_count": 1,
                                        "uav_positions": [[0, 0]], "bs_positions": [[80, 0]]}})
    inst = build_instance(cfg)
    assert inst.uavs[0].position == (0.0, 0.0, 100.0)
    assert inst.bss[0].position == (80.0, 0.0, 20.0)
