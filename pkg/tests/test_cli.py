"""CLI contract: config validation, data products, manifests,
round-trips and reproducibility."""

import json
import zipfile
from pathlib import Path

import numpy as np
import pydantic
import pytest
import yaml

import tearfilm
from tearfilm.cli import main, run_config, run_sweep
from tearfilm.config import RunConfig, SweepConfig
from tearfilm.outputs import read_snapshot


def write_yaml(path: Path, data: dict) -> Path:
    path.write_text(yaml.safe_dump(data))
    return path


BASE_STREAK = {
    "mode": "streak1d",
    "streak": {"n": 64},
    "integrator": {"t_end": 6.0},
    "evaporation": {"v_b": 0.1, "peaks": [{"a": 1.0, "widths": [0.5, 0.5]}]},
    "outputs": {"snapshot_cadence": 1.0},
}


class TestConfigSchema:
    def test_defaults_traceable(self):
        cfg = RunConfig()
        assert cfg.params.Pc == 0.392
        assert cfg.params.Pe_c == 6.76
        assert cfg.params.Pe_f == 27.7
        assert cfg.params.phi == 0.417
        assert cfg.grid.nx == 60 and cfg.grid.ny == 60
        assert cfg.integrator.tbu_threshold == pytest.approx(1 / 4.5)

    def test_unknown_key_rejected_with_name(self):
        with pytest.raises(pydantic.ValidationError, match="peeks"):
            RunConfig.model_validate(
                {"evaporation": {"peeks": [{"a": 1.0}]}}
            )

    def test_nested_unknown_key(self):
        with pytest.raises(pydantic.ValidationError, match="rtoll"):
            RunConfig.model_validate({"integrator": {"rtoll": 1e-6}})

    def test_bad_mode_rejected(self):
        with pytest.raises(pydantic.ValidationError):
            RunConfig.model_validate({"mode": "warp"})

    def test_auto_probes_include_origin_and_centers(self):
        cfg = RunConfig.model_validate({
            "evaporation": {"peaks": [
                {"a": 1.0, "center": [-1.5, 0.0]},
                {"a": 1.0, "center": [1.5, 0.0]},
            ]}
        })
        pts = cfg.probe_points()
        assert (pts == np.array([0.0, 0.0])).all(axis=1).any()
        assert pts.shape == (3, 2)

    def test_sweep_cases(self):
        cfg = SweepConfig.model_validate({
            "sweep": {"kind": "fixed_product", "values": [0.5, 0.25],
                      "product": 0.25},
        })
        cases = dict(cfg.cases())
        widths = cases["xw0.5"].evaporation.peaks[0].widths
        assert widths == (0.5, 0.5)
        widths = cases["xw0.25"].evaporation.peaks[0].widths
        assert widths == (0.25, 1.0)

    def test_two_spot_cases(self):
        cfg = SweepConfig.model_validate({
            "sweep": {"kind": "two_spot_separation", "values": [0.8]},
        })
        label, case = cfg.cases()[0]
        centers = [p.center for p in case.evaporation.peaks]
        assert centers == [(-0.8, 0.0), (0.8, 0.0)]


@pytest.fixture(scope="module")
def streak_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("streak_run")
    cfg = RunConfig.model_validate(BASE_STREAK)
    manifest = run_config(cfg, out)
    return out, manifest


class TestRunProducts:
    def test_manifest_contents(self, streak_out):
        out, manifest = streak_out
        assert manifest["halted_reason"] == "event"
        assert manifest["tbut"] == pytest.approx(1.87, abs=0.03)
        assert manifest["tbut_seconds"] == pytest.approx(manifest["tbut"] * 27.0)
        assert manifest["code_version"] == tearfilm.__version__
        assert manifest["config"]["mode"] == "streak1d"

    def test_every_listed_file_exists(self, streak_out):
        out, manifest = streak_out
        for rel in manifest["files"]:
            assert (out / rel).exists()

    def test_trace_csv_schema(self, streak_out):
        import csv

        out, _ = streak_out
        with open(out / "probe_00.csv", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        assert header == ["t", "h", "p", "c", "f", "I",
                          "advection", "diffusion", "evaporation", "osmosis"]
        ts = [float(r[0]) for r in rows]
        assert all(b > a for a, b in zip(ts, ts[1:]))
        assert float(rows[-1][1]) == pytest.approx(1 / 4.5, abs=1e-6)

    def test_snapshot_roundtrip_bit_exact(self, streak_out):
        out, manifest = streak_out
        snaps = sorted((out / "snapshots").glob("snap_*_h.bin"))
        data, sidecar = read_snapshot(snaps[-1])
        assert sidecar["dtype"] == "float64"
        assert sidecar["byte_order"] == "little"
        # the final thickness snapshot bottoms out at the threshold
        assert data.min() == pytest.approx(1 / 4.5, abs=1e-6)
        raw = (out / "snapshots" / snaps[-1].name).read_bytes()
        assert np.frombuffer(raw, dtype="<f8").reshape(sidecar["shape"]).tobytes() == data.tobytes()

    def test_reproducible_modulo_timestamps(self, streak_out, tmp_path):
        out, manifest = streak_out
        cfg = RunConfig.model_validate(BASE_STREAK)
        manifest2 = run_config(cfg, tmp_path / "again")
        drop = ("started", "finished", "wall_s")
        a = {k: v for k, v in manifest.items() if k not in drop}
        b = {k: v for k, v in manifest2.items() if k not in drop}
        assert a == b  # identical checksums for identical files


class TestVerbs:
    def test_validate_config_ok(self, tmp_path, capsys):
        path = write_yaml(tmp_path / "ok.yaml", BASE_STREAK)
        assert main(["validate-config", "--config", str(path)]) == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_config_bad_key(self, tmp_path, capsys):
        path = write_yaml(tmp_path / "bad.yaml",
                          {"integrator": {"rtolx": 1.0}})
        assert main(["validate-config", "--config", str(path)]) == 2
        assert "rtolx" in capsys.readouterr().err

    def test_pod_compare_requires_study_mode(self, tmp_path, capsys):
        path = write_yaml(tmp_path / "full.yaml", BASE_STREAK)
        assert main(["pod-compare", "--config", str(path),
                     "--out-dir", str(tmp_path / "o")]) == 2

    def test_run_verb(self, tmp_path):
        path = write_yaml(tmp_path / "run.yaml", BASE_STREAK)
        assert main(["run", "--config", str(path),
                     "--out-dir", str(tmp_path / "out"),
                     "--log-level", "WARNING"]) == 0
        assert (tmp_path / "out" / "manifest.json").exists()


class TestSweep:
    def test_summary_and_case_dirs(self, tmp_path):
        sweep = SweepConfig.model_validate({
            "base": {
                "grid": {"nx": 16, "ny": 16},
                "integrator": {"t_end": 6.0},
                "evaporation": {"v_b": 0.1},
            },
            "sweep": {"kind": "fixed_width", "values": [0.5], "x_w": 0.5},
        })
        path = run_sweep(sweep, tmp_path, threads=1)
        text = path.read_text()
        assert "value,label,status" in text
        assert "yw0.5,ok" in text
        assert (tmp_path / "case_yw0.5" / "manifest.json").exists()

    def test_failed_case_recorded(self, tmp_path):
        # a peak below the baseline is rejected at J evaluation; the
        # sweep must record the failure and keep going
        sweep = SweepConfig.model_validate({
            "base": {
                "grid": {"nx": 16, "ny": 16},
                "integrator": {"t_end": 0.5},
                "evaporation": {"v_b": 0.1},
            },
            "sweep": {"kind": "fixed_width", "values": [0.5, 1.0],
                      "x_w": 0.5, "a": 0.05},
        })
        path = run_sweep(sweep, tmp_path, threads=1)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 3
        assert all("failed" in line for line in lines[1:])


class TestPodMode:
    def test_pod_run_with_basis_export(self, tmp_path):
        cfg = RunConfig.model_validate({
            "mode": "pod",
            "grid": {"nx": 16, "ny": 16},
            "integrator": {"t_end": 6.0},
            "evaporation": {"v_b": 0.1,
                            "peaks": [{"a": 1.0, "widths": [0.5, 0.5]}]},
            "pod": {"tau": 0.5, "snapshot_count": 30, "ranks": [10, 15, 10],
                    "basis_file": "basis.podz"},
        })
        manifest = run_config(cfg, tmp_path)
        assert manifest["halted_reason"] == "event"
        assert manifest["ranks"] == [10, 15, 10, 10]
        with zipfile.ZipFile(tmp_path / "basis.podz") as zf:
            header = json.loads(zf.read("header.json"))
        assert header["ranks"] == [10, 15, 10, 10]


def test_intensity_normalization_option():
    cfg = RunConfig.model_validate(
        {"params": {"normalize_intensity": True, "f0": 0.8}}
    )
    params = cfg.params.to_model()
    import numpy as np
    from tearfilm.model import fl_intensity

    I = fl_intensity(np.array([1.0]), np.array([0.8]), params)
    assert abs(I[0] - 1.0) < 1e-12
