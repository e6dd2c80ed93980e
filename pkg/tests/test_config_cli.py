import json
import math

import numpy as np
import pytest

from optodicke.cli import main
from optodicke.config import (BUNDLED, ConfigError, config_from_dict,
                              load_config)

N = 1.0e6

MINIMAL = {
    "params": {"omega_a": 0.05, "omega": 8.1, "omega_m": 1.0, "kappa": 8.1,
               "gamma_m": 0.05, "delta0": 0.05, "UN": 0.0, "lambda": 0.3,
               "n_atoms": N},
}


class TestConfigParsing:
    def test_aggregate_aliases_expand(self):
        cfg = config_from_dict(json.loads(json.dumps(MINIMAL)))
        assert cfg.params.uN == pytest.approx(0.0)
        assert cfg.params.lam == pytest.approx(0.3)
        assert cfg.params.g == pytest.approx(0.3 / math.sqrt(N))

    def test_gsqrtN_alias(self):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"].pop("lambda")
        doc["params"]["gsqrtN"] = 0.45
        cfg = config_from_dict(doc)
        assert cfg.params.lam == pytest.approx(0.45)

    def test_unknown_key_rejected(self):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"]["coupling_typo"] = 1.0
        with pytest.raises(ConfigError):
            config_from_dict(doc)
        doc = json.loads(json.dumps(MINIMAL))
        doc["unexpected_block"] = {}
        with pytest.raises(ConfigError):
            config_from_dict(doc)

    def test_conflicting_aliases_rejected(self):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"]["g"] = 1e-4
        with pytest.raises(ConfigError):
            config_from_dict(doc)

    def test_physical_invariants_revalidated(self):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"]["kappa"] = 0.0
        with pytest.raises(ConfigError):
            config_from_dict(doc)

    def test_bundled_presets_all_load(self):
        for name in BUNDLED:
            cfg = load_config(name)
            assert cfg.name == name

    def test_missing_file_is_config_error(self):
        with pytest.raises(ConfigError):
            load_config("no_such_preset_or_file.json")

    def test_resolved_dict_round_trips_params(self):
        cfg = load_config("point_a")
        echo = cfg.resolved_dict()
        assert echo["params"]["uN"] == pytest.approx(-40.0)
        assert echo["params"]["lambda"] == pytest.approx(0.55)
        assert echo["params"]["g"] == pytest.approx(0.55 / math.sqrt(N))
        json.dumps(echo)  # must be serializable


class TestCliEvolve:
    def test_g_zero_config_constant_trajectory(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"]["lambda"] = 0.0
        doc["integrator"] = {"t_end": 50.0}
        cfg_path = tmp_path / "gzero.json"
        cfg_path.write_text(json.dumps(doc))
        rc = main(["evolve", "--config", str(cfg_path), "--out",
                   str(tmp_path)])
        assert rc == 0
        summary = json.loads((tmp_path / "gzero_summary.json").read_text())
        assert summary["relaxation_time_us"] == 0.0
        assert summary["cycle"]["verdict"] == "converged"
        rows = (tmp_path / "gzero_trajectory.csv").read_text().splitlines()
        assert rows[0].startswith("t,Sx,Sy,Sz")
        first, last = rows[1].split(","), rows[-1].split(",")
        assert first[3] == last[3]  # Sz constant

    def test_blowup_exits_3(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"]["lambda"] = 0.9
        doc["integrator"] = {"dt": 1.0, "t_end": 500.0, "sample_every": 1}
        doc["evolve"] = {"initial": {"kind": "normal", "tip": 1e-3}}
        cfg_path = tmp_path / "blow.json"
        cfg_path.write_text(json.dumps(doc))
        rc = main(["evolve", "--config", str(cfg_path), "--out",
                   str(tmp_path)])
        assert rc == 3

    def test_invalid_config_exits_2(self, tmp_path):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps({"params": {"kappa": -1.0}}))
        rc = main(["evolve", "--config", str(cfg_path), "--out",
                   str(tmp_path)])
        assert rc == 2

    def test_not_json_exits_2(self, tmp_path):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text("not json at all {")
        assert main(["evolve", "--config", str(cfg_path)]) == 2


class TestCliBoundary:
    def test_empty_range_writes_header_only(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["boundary"] = {"branches": ["sra_n"], "omega": [-30.0, -1.0]}
        cfg_path = tmp_path / "empty.json"
        cfg_path.write_text(json.dumps(doc))
        rc = main(["boundary", "--config", str(cfg_path), "--out",
                   str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "empty_boundary_sra_n.csv").read_text().splitlines()
        assert lines == ["omega,lambda_c,segment"]

    def test_pumped_run_emits_reference_files(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"]["UN"] = -20.0
        doc["params"]["eta_p"] = 1.0
        doc["boundary"] = {"branches": ["sra_n"], "omega": [0.0, 15.0],
                           "tol": 5e-3}
        cfg_path = tmp_path / "pump.json"
        cfg_path.write_text(json.dumps(doc))
        rc = main(["boundary", "--config", str(cfg_path), "--out",
                   str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "pump_boundary_sra_n.csv").exists()
        assert (tmp_path / "pump_boundary_sra_n_ref.csv").exists()
        meta = json.loads((tmp_path / "pump_boundary_meta.json").read_text())
        assert meta["srb_window"] is not None

    def test_boundary_csv_matches_formula(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["boundary"] = {"branches": ["sra_n"], "omega": [4.0, 12.0],
                           "tol": 1e-3}
        cfg_path = tmp_path / "b.json"
        cfg_path.write_text(json.dumps(doc))
        assert main(["boundary", "--config", str(cfg_path), "--out",
                     str(tmp_path)]) == 0
        rows = (tmp_path / "b_boundary_sra_n.csv").read_text().splitlines()[1:]
        assert len(rows) > 8
        for row in rows[::5]:
            omega, lam, seg = row.split(",")
            expected = 0.5 * math.sqrt(
                0.05 * (8.1 ** 2 + float(omega) ** 2) / float(omega))
            assert float(lam) == pytest.approx(expected, rel=1e-12)
            assert seg == "0"


class TestCliSweep:
    def test_minimal_sweep_json_valid_and_reproducible(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"]["UN"] = -40.0
        doc["sweep"] = {"omega": [-5.0, 5.0], "lambda": [0.1, 0.45],
                        "resolution": [2, 2], "mode": "analytic"}
        cfg_path = tmp_path / "mini.json"
        cfg_path.write_text(json.dumps(doc))
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        assert main(["sweep", "--config", str(cfg_path), "--out",
                     str(out1), "--threads", "1"]) == 0
        assert main(["sweep", "--config", str(cfg_path), "--out",
                     str(out2), "--threads", "2"]) == 0
        b1 = (out1 / "mini_phase_diagram.json").read_bytes()
        b2 = (out2 / "mini_phase_diagram.json").read_bytes()
        assert b1 == b2
        doc_out = json.loads(b1)
        assert len(doc_out["labels"]) == 2
        assert len(doc_out["labels"][0]) == 2
        assert doc_out["config"]["params"]["uN"] == pytest.approx(-40.0)
        assert (out1 / "mini_phase_labels.csv").exists()

    def test_mode_override_flag(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["sweep"] = {"omega": [7.0, 9.0], "lambda": [0.2, 0.4],
                        "resolution": [2, 2], "mode": "hybrid"}
        cfg_path = tmp_path / "m.json"
        cfg_path.write_text(json.dumps(doc))
        assert main(["sweep", "--config", str(cfg_path), "--out",
                     str(tmp_path), "--mode", "analytic"]) == 0
        doc_out = json.loads((tmp_path / "m_phase_diagram.json").read_text())
        assert doc_out["mode"] == "analytic"


class TestCliSelftest:
    def test_corrupted_dt_fails_rk4_checks(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["selftest"] = {"dt": 1.0, "oracle_points": 0,
                           "sweep_resolution": [2, 2]}
        cfg_path = tmp_path / "broken.json"
        cfg_path.write_text(json.dumps(doc))
        rc = main(["selftest", "--config", str(cfg_path), "--out",
                   str(tmp_path)])
        assert rc == 4
        report = json.loads((tmp_path / "broken_selftest.json").read_text())
        failed = {c["name"] for c in report["checks"] if not c["passed"]}
        assert "rk4_order" in failed or "spin_norm_drift" in failed

    def test_kappa_zero_rejected_at_load(self, tmp_path):
        doc = json.loads(json.dumps(MINIMAL))
        doc["params"]["kappa"] = 0.0
        cfg_path = tmp_path / "k0.json"
        cfg_path.write_text(json.dumps(doc))
        assert main(["selftest", "--config", str(cfg_path), "--out",
                     str(tmp_path)]) == 2


def test_emitted_json_reparses_identically(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["integrator"] = {"t_end": 10.0}
    cfg_path = tmp_path / "rt.json"
    cfg_path.write_text(json.dumps(doc))
    assert main(["evolve", "--config", str(cfg_path), "--out",
                 str(tmp_path)]) == 0
    text = (tmp_path / "rt_summary.json").read_text()
    doc1 = json.loads(text)
    assert json.loads(json.dumps(doc1, sort_keys=True, indent=1)) == doc1
