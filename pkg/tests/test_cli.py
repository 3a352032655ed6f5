import json
import logging
from pathlib import Path

import numpy as np
import pytest

from pageflat.cli import main
from pageflat.imagefile import read_image, write_image
from pageflat.raster import Raster

GOLDEN = Path(__file__).parent / "golden" / "default_cylinder.json"
SMALL_SCENE = {"width": 400, "height": 520, "bump": 40.0, "margin": 30, "grid": [10, 12]}


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    scene = d / "scene.json"
    scene.write_text(json.dumps(SMALL_SCENE))
    assert main(["synth", str(scene), "-o", str(d / "truth")]) == 0
    return d


def test_synth_is_byte_deterministic(bundle):
    assert main(["synth", str(bundle / "scene.json"), "-o", str(bundle / "again")]) == 0
    for name in ("image.png", "flat.png", "mesh.json", "truth.json"):
        assert (bundle / "truth" / name).read_bytes() == (bundle / "again" / name).read_bytes()


def test_flatten_and_score(bundle, tmp_path):
    out, rep, lat, met = (tmp_path / n for n in ("out.png", "rep.json", "lat.json", "m.json"))
    rc = main(["flatten", str(bundle / "truth" / "image.png"), "-o", str(out), "--grid", "10x12",
               "--report", str(rep), "--lattice", str(lat)])
    assert rc == 0 and out.exists()
    report = json.loads(rep.read_text())
    assert report["grid"] == {"M": 10, "N": 12}
    assert main(["score", str(out), str(bundle / "truth"), "--mesh", str(lat), "-o", str(met)]) == 0
    metrics = json.loads(met.read_text())
    assert set(metrics) == {"ssim", "line_straightness", "mesh_rmse"}
    assert metrics["ssim"] > 0.3


def test_jobs_bit_identical(bundle, tmp_path):
    for j in ("1", "4"):
        assert main(["flatten", str(bundle / "truth" / "image.png"), "-o", str(tmp_path / f"o{j}.png"),
                     "--jobs", j]) == 0
    assert (tmp_path / "o1.png").read_bytes() == (tmp_path / "o4.png").read_bytes()


def test_score_flat_against_itself(bundle, capsys):
    assert main(["score", str(bundle / "truth" / "flat.png"), str(bundle / "truth")]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["ssim"] == pytest.approx(1.0)
    assert metrics["line_straightness"] == pytest.approx(0.0, abs=1e-6)


def test_config_file_and_overrides(bundle, tmp_path):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "o.jpg"
    rc = main(["flatten", str(bundle / "truth" / "image.png"), "-o", str(out), "--degree", "3",
               "--kink-angle", "20", "--gamma-clamp", "0.2,5", "--save-config", str(cfg)])
    assert rc == 0
    saved = json.loads(cfg.read_text())
    assert saved["degree"] == 3 and saved["gamma_clamp"] == [0.2, 5.0]
    assert saved["kink_angle"] == pytest.approx(np.radians(20))
    assert read_image(out).width > 0
    rep = tmp_path / "r.json"
    assert main(["flatten", str(bundle / "truth" / "image.png"), "-o", str(tmp_path / "p.png"),
                 "--config", str(cfg), "--grid", "6x6", "--report", str(rep)]) == 0
    r = json.loads(rep.read_text())
    assert r["degree"] == 3 and r["grid"] == {"M": 6, "N": 6}


def test_unreadable_input(tmp_path, capsys):
    assert main(["flatten", str(tmp_path / "missing.png"), "-o", str(tmp_path / "o.png")]) == 2
    assert "[io]" in capsys.readouterr().err


def test_malformed_scene(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["synth", str(bad), "-o", str(tmp_path / "x")]) == 2


def test_bad_config_values(bundle, tmp_path):
    assert main(["flatten", str(bundle / "truth" / "image.png"), "-o", str(tmp_path / "o.png"),
                 "--degree", "1"]) == 2
    assert main(["flatten", str(bundle / "truth" / "image.png"), "-o", str(tmp_path / "o.tif")]) == 2


def test_stage_failure_exit_code(tmp_path, capsys):
    blank = tmp_path / "blank.png"
    write_image(Raster(np.full((40, 40), 200, np.uint8)), blank)
    assert main(["flatten", str(blank), "-o", str(tmp_path / "o.png")]) == 3
    assert "[binarize]" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as err:
        main(["flatten", "--grid", "3", "x.png", "-o", "y.png"])
    assert err.value.code == 2


def test_log_level_from_environment(bundle, tmp_path, monkeypatch, caplog):
    monkeypatch.setenv("PAGEFLAT_LOG", "info")
    with caplog.at_level(logging.INFO, logger="pageflat"):
        main(["flatten", str(bundle / "truth" / "image.png"), "-o", str(tmp_path / "o.png")])
    assert any("wrote" in r.message for r in caplog.records)


def test_default_cylinder_matches_golden(tmp_path):
    golden = json.loads(GOLDEN.read_text())
    assert main(["synth", "-", "-o", str(tmp_path / "t")]) == 0
    assert main(["flatten", str(tmp_path / "t" / "image.png"), "-o", str(tmp_path / "o.png"),
                 "--lattice", str(tmp_path / "l.json")]) == 0
    assert main(["score", str(tmp_path / "o.png"), str(tmp_path / "t"), "--mesh", str(tmp_path / "l.json"),
                 "-o", str(tmp_path / "m.json")]) == 0
    got = json.loads((tmp_path / "m.json").read_text())
    tol = golden["tolerance"]
    for key, want in golden["metrics"].items():
        assert abs(got[key] - want) <= tol[key], (key, got[key], want)
