import math

import numpy as np
import pytest
import yaml

from bisig.cli import main
from bisig.config import default_config_dict
from bisig.io import load_cube


@pytest.fixture()
def md_config(tmp_path):
    """Small but resolvable micro-Doppler run (4.1 blade-passing periods)."""
    data = default_config_dict()
    data["out_dir"] = str(tmp_path / "out")
    data["ofdm"].update({"bandwidth_hz": 32e6, "n_carriers": 256, "n_active": 192})
    data["simulation"]["n_symbols"] = 10240
    data["processing"]["subsample_factor"] = 1
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return path, tmp_path / "out"


@pytest.fixture()
def vna_config(tmp_path):
    data = default_config_dict()
    data["out_dir"] = str(tmp_path / "vna")
    data["scene"]["background"] = [{"position_m": [4.0, 4.0, 0.0], "amplitude": 2.0}]
    data["vna"].update({"n_freq": 401, "beta_start_deg": 10.0, "beta_stop_deg": 180.0,
                        "beta_step_deg": 85.0})
    path = tmp_path / "vna.yaml"
    path.write_text(yaml.safe_dump(data))
    return path, tmp_path / "vna"


class TestSimulateMd:
    def test_writes_cube_and_sidecar(self, md_config):
        config_path, out = md_config
        assert main(["simulate-md", "--config", str(config_path)]) == 0
        cube_path = out / "cube_beta060.00.stc"
        assert cube_path.exists()
        sidecar = yaml.safe_load((out / "cube_beta060.00.yaml").read_text())
        assert sidecar["beta_deg"] == 60.0
        assert sidecar["propellers"][0]["n_blades"] == 2
        assert sidecar["propellers"][0]["predicted_spacing_hz"] == 50.0
        assert sidecar["predicted_spread_hz"] == pytest.approx(1110.7, abs=0.5)
        assert "config_sha256" in sidecar
        cube = load_cube(cube_path)
        assert cube.n_symbols == 10240

    def test_beta_list_writes_one_cube_per_angle(self, md_config):
        config_path, out = md_config
        code = main(["simulate-md", "--config", str(config_path), "--symbols", "64",
                     "--beta-list", "30,90"])
        assert code == 0
        assert (out / "cube_beta030.00.stc").exists()
        assert (out / "cube_beta090.00.stc").exists()

    def test_repeat_run_is_byte_identical(self, md_config, tmp_path):
        config_path, out = md_config
        main(["simulate-md", "--config", str(config_path), "--symbols", "256"])
        first = (out / "cube_beta060.00.stc").read_bytes()
        main(["simulate-md", "--config", str(config_path), "--symbols", "256"])
        assert (out / "cube_beta060.00.stc").read_bytes() == first

    def test_bad_beta_list_is_config_error(self, md_config):
        config_path, _ = md_config
        assert main(["simulate-md", "--config", str(config_path), "--beta-list", "10,oops"]) == 2
        assert main(["simulate-md", "--config", str(config_path), "--beta-list", "0"]) == 2

    def test_missing_config_file_is_config_error(self):
        assert main(["simulate-md", "--config", "/nonexistent/run.yaml"]) == 2


class TestProcessMd:
    def test_full_chain_outputs(self, md_config):
        config_path, out = md_config
        main(["simulate-md", "--config", str(config_path)])
        cube = out / "cube_beta060.00.stc"
        assert main(["process-md", "--config", str(config_path), str(cube)]) == 0
        for suffix in ("_spectrum.csv", "_spectrogram.csv", "_lines.csv"):
            assert (out / f"cube_beta060.00{suffix}").exists()

        lines_text = (out / "cube_beta060.00_lines.csv").read_text()
        assert "# resolved: true" in lines_text
        spacing = float(next(l for l in lines_text.splitlines() if l.startswith("# spacing_hz"))
                        .split(":")[1])
        assert spacing == pytest.approx(50.0, abs=125000.0 / 10240)

        spreads = (out / "spreads.csv").read_text().splitlines()
        header = spreads[2].split(",")
        row = dict(zip(header, spreads[3].split(",")))
        assert row["resolved"] == "true"
        assert float(row["spread_hz"]) == pytest.approx(float(row["predicted_spread_hz"]), rel=0.05)

    def test_truncated_observation_flagged_unresolved(self, md_config):
        config_path, out = md_config
        main(["simulate-md", "--config", str(config_path), "--symbols", "1024"])
        cube = out / "cube_beta060.00.stc"
        main(["process-md", "--config", str(config_path), str(cube)])
        assert "# resolved: false" in (out / "cube_beta060.00_lines.csv").read_text()

    def test_beta_sweep_spread_table_decreases(self, md_config):
        config_path, out = md_config
        main(["simulate-md", "--config", str(config_path), "--beta-list", "30,90,150"])
        cubes = sorted(str(p) for p in out.glob("cube_beta*.stc"))
        assert len(cubes) == 3
        main(["process-md", "--config", str(config_path)] + cubes)
        rows = [r for r in (out / "spreads.csv").read_text().splitlines()
                if r and not r.startswith("#")]
        header = rows[0].split(",")
        table = [dict(zip(header, r.split(","))) for r in rows[1:]]
        table.sort(key=lambda row: float(row["beta_deg"]))
        spreads = [float(row["spread_hz"]) for row in table]
        predictions = [float(row["predicted_spread_hz"]) for row in table]
        assert spreads == sorted(spreads, reverse=True)
        assert predictions == sorted(predictions, reverse=True)
        for measured, predicted in zip(spreads, predictions):
            assert measured == pytest.approx(predicted, rel=0.1)


class TestVnaChain:
    def test_simulate_and_process(self, vna_config):
        config_path, out = vna_config
        assert main(["simulate-vna", "--config", str(config_path)]) == 0
        assert (out / "vna_dut_bg.swp").exists()
        assert (out / "vna_bg.swp").exists()
        assert (out / "system_response.csv").exists()

        assert main(["process-refl", "--config", str(config_path),
                     "--dut", str(out / "vna_dut_bg.swp"),
                     "--bg", str(out / "vna_bg.swp"),
                     "--response", str(out / "system_response.csv")]) == 0
        rows = [r for r in (out / "reflectivity_map.csv").read_text().splitlines()
                if r and not r.startswith("#")]
        values = [float(r.split(",")[3]) for r in rows[1:]]
        assert max(values) == pytest.approx(0.0, abs=1e-9)  # normalized global max
        assert all(v <= 1e-9 for v in values)

    def test_vna_repeat_run_identical(self, vna_config):
        config_path, out = vna_config
        main(["simulate-vna", "--config", str(config_path)])
        first = (out / "vna_dut_bg.swp").read_bytes()
        main(["simulate-vna", "--config", str(config_path)])
        assert (out / "vna_dut_bg.swp").read_bytes() == first

    def test_missing_sweep_file_is_config_error(self, vna_config):
        config_path, out = vna_config
        assert main(["process-refl", "--config", str(config_path),
                     "--dut", str(out / "missing.swp")]) == 2

    def test_mismatched_response_grid_is_numerical_error(self, vna_config, tmp_path):
        config_path, out = vna_config
        main(["simulate-vna", "--config", str(config_path)])
        bad = tmp_path / "bad_response.csv"
        bad.write_text("freq_hz,real,imag\n2e9,1,0\n3e9,1,0\n")
        code = main(["process-refl", "--config", str(config_path),
                     "--dut", str(out / "vna_dut_bg.swp"),
                     "--bg", str(out / "vna_bg.swp"),
                     "--response", str(bad)])
        assert code == 3


class TestCliMisc:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "bisig" in capsys.readouterr().out

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
