import csv
import json

import pytest

from armsort.cli import main
from armsort.reference import DETECTION_TABLE
from armsort.vision import Color, RasterImage, render_scene, write_image


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestFk:
    def test_start_pose(self, capsys):
        code, out, _ = run(capsys, "fk", "--joints", "120,93,-132")
        assert code == 0 and out.strip() == "(-20.1565, 34.9121, 19.9458)"

    def test_zero_pose(self, capsys):
        assert run(capsys, "fk", "--joints", "0,0,0")[1].strip() == "(70.8000, 0.0000, 17.5000)"

    def test_dump(self, capsys):
        out = run(capsys, "fk", "--joints", "0,0,0", "--dump")[1].splitlines()
        assert len(out) == 5 and out[-1].split() == ["0.0000", "0.0000", "0.0000", "1.0000"]

    def test_missing_joints(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["fk"])
        assert info.value.code == 2

    @pytest.mark.parametrize("joints", ["1,2", "a,b,c"])
    def test_bad_joints(self, capsys, joints):
        try:
            code = main(["fk", "--joints", joints])
        except SystemExit as exc:
            code = exc.code
        assert code == 2


class TestIk:
    def test_route_m1(self, capsys, tmp_path):
        code, out, _ = run(capsys, "ik", "--target", "-10.99,49.70,12.76", "--out", str(tmp_path))
        assert code == 0 and "converged in" in out and "initial error 18.82" in out
        rows = list(csv.reader((tmp_path / "ik_trace.csv").open()))
        assert rows[0][:2] == ["iter", "theta1"] and 50 <= len(rows) - 2 <= 110

    def test_outside_workspace(self, capsys, tmp_path):
        assert run(capsys, "ik", "--target", "0,10,10", "--out", str(tmp_path))[0] == 3

    def test_already_there(self, capsys, tmp_path):
        out = run(capsys, "ik", "--target", "-20.1565,34.9121,19.9458", "--out", str(tmp_path))[1]
        assert "converged in 0 iterations" in out

    def test_sweep(self, capsys, tmp_path):
        code, out, _ = run(capsys, "ik", "--target", "-10.99,49.70,12.76", "--sweep-kp",
                           "0.01,0.1,0.5", "--out", str(tmp_path))
        assert code == 0 and len(out.splitlines()) == 3
        assert {p.name for p in tmp_path.iterdir()} == {"ik_trace_kp0.01.csv", "ik_trace_kp0.1.csv",
                                                         "ik_trace_kp0.5.csv"}

    def test_output_dir_from_environment(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("ARMSORT_OUT", str(tmp_path / "env"))
        assert run(capsys, "ik", "--target", "-10.99,49.70,12.76")[0] == 0
        assert (tmp_path / "env" / "ik_trace.csv").exists()

    def test_strict_limits_reject_start(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"limits": "paper-strict"}))
        assert run(capsys, "--config", str(cfg), "ik", "--target", "0,40,20", "--out", str(tmp_path))[0] == 2

    def test_unknown_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"gain": 1}))
        assert run(capsys, "--config", str(cfg), "fk", "--joints", "0,0,0")[0] == 2


class TestDetect:
    def test_reference_image(self, capsys, tmp_path):
        img = tmp_path / "scene.ppm"
        write_image(render_scene([(Color(r[1]), r[2], r[3]) for r in DETECTION_TABLE]), img)
        assert run(capsys, "detect", str(img), "--out", str(tmp_path))[0] == 0
        rows = list(csv.DictReader((tmp_path / "detections.csv").open()))
        assert len(rows) == 12 and [r["color"] for r in rows] == ["red"] * 4 + ["green"] * 4 + ["blue"] * 4
        assert float(rows[0]["x_cm"]) == pytest.approx(-10.99, abs=0.05)

    def test_blank(self, capsys, tmp_path):
        write_image(RasterImage.blank(), tmp_path / "blank.ppm")
        assert run(capsys, "detect", str(tmp_path / "blank.ppm"), "--csv", str(tmp_path / "d.csv"))[0] == 0
        assert (tmp_path / "d.csv").read_text().splitlines() == ["no,object,color,x_px,y_px,x_cm,y_cm,area"]

    def test_corrupt(self, capsys, tmp_path):
        (tmp_path / "bad.ppm").write_bytes(b"\x00\x01garbage")
        assert run(capsys, "detect", str(tmp_path / "bad.ppm"), "--out", str(tmp_path))[0] == 4

    def test_missing(self, capsys, tmp_path):
        assert run(capsys, "detect", str(tmp_path / "nope.png"), "--out", str(tmp_path))[0] == 4


class TestSimulateAndStats:
    def test_zero_noise_all_succeed(self, capsys, tmp_path):
        code, _, _ = run(capsys, "simulate", "--trials", "1", "--noise", "0", "--out", str(tmp_path))
        assert code == 0
        rows = list(csv.DictReader((tmp_path / "routes_trial000.csv").open()))
        assert len(rows) == 24 and all(r["success"] == "1" for r in rows)
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["routes"] == 24 and summary["noise_std"] == 0

    def test_reference_scene_flag(self, capsys, tmp_path):
        run(capsys, "simulate", "--scene", "reference", "--noise", "0", "--out", str(tmp_path))
        rows = list(csv.DictReader((tmp_path / "routes_trial000.csv").open()))
        assert rows[0]["object"] == "M1" and float(rows[0]["initial"]) == pytest.approx(18.82, abs=0.01)

    def test_deterministic(self, capsys, tmp_path):
        for d in ("a", "b"):
            run(capsys, "simulate", "--trials", "2", "--seed", "7", "--out", str(tmp_path / d))
        for name in ("routes_trial000.csv", "routes_trial001.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_stats_pipeline(self, capsys, tmp_path):
        run(capsys, "simulate", "--trials", "2", "--seed", "7", "--out", str(tmp_path))
        csvs = sorted(str(p) for p in tmp_path.glob("routes_trial*.csv"))
        code, out, _ = run(capsys, "stats", *csvs, "--out", str(tmp_path / "st"))
        assert code == 0 and "weibull" in out
        doc = json.loads((tmp_path / "st" / "summary.json").read_text())
        assert doc["n"] == 48 and set(doc["summary"]) == {"dx", "dy", "dz", "euclid_xy", "euclid_xyz"}
        fit = json.loads((tmp_path / "st" / "weibull.json").read_text())
        assert fit["shape"] > 0 and fit["scale"] > 0
        hist = list(csv.reader((tmp_path / "st" / "histogram.csv").open()))
        assert hist[0] == ["bin_center", "density"] and float(hist[1][0]) == 0.025

    def test_coarse_bin(self, capsys, tmp_path):
        run(capsys, "simulate", "--trials", "1", "--seed", "3", "--out", str(tmp_path))
        run(capsys, "stats", str(tmp_path / "routes_trial000.csv"), "--bin", "1.2", "--out", str(tmp_path))
        hist = list(csv.reader((tmp_path / "histogram.csv").open()))
        doc = json.loads((tmp_path / "summary.json").read_text())
        assert float(hist[1][1]) * 1.2 == pytest.approx(doc["success_coarse_bin"], abs=1e-3)

    def test_single_route(self, capsys, tmp_path):
        run(capsys, "simulate", "--trials", "1", "--seed", "3", "--out", str(tmp_path))
        lines = (tmp_path / "routes_trial000.csv").read_text().splitlines()
        (tmp_path / "one.csv").write_text("\n".join(lines[:2]) + "\n")
        code, out, _ = run(capsys, "stats", str(tmp_path / "one.csv"), "--out", str(tmp_path / "st"))
        assert code == 0 and "notice" in out
        assert not (tmp_path / "st" / "weibull.json").exists()
        assert json.loads((tmp_path / "st" / "summary.json").read_text())["summary"]["dx"]["std"] is None

    def test_no_input(self, capsys, tmp_path):
        assert run(capsys, "stats", "--out", str(tmp_path))[0] == 5

    def test_only_skipped_routes(self, capsys, tmp_path):
        (tmp_path / "r.csv").write_text("dx,dy,dz,skipped\n,,,pick target outside workspace\n")
        assert run(capsys, "stats", str(tmp_path / "r.csv"), "--out", str(tmp_path))[0] == 5

    def test_unreadable_route_file(self, capsys, tmp_path):
        assert run(capsys, "stats", str(tmp_path / "missing.csv"), "--out", str(tmp_path))[0] == 4
