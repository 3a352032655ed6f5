import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pageflat import synth
from pageflat.errors import StageError
from pageflat.pipeline import HINTS, PipelineConfig, flatten
from pageflat.raster import Raster


@pytest.fixture(scope="module")
def small_truth():
    scene, spec = synth.scene_from_dict({"width": 400, "height": 520, "bump": 40.0, "margin": 30})
    return synth.render(scene, spec)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"degree": 1}, {"grid": (1, 5)}, {"gamma_clamp": (0.0, 2.0)},
                                    {"gamma_clamp": (3.0, 2.0)}, {"mode": "triple"}, {"kink_window": 0},
                                    {"threshold": 300}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PipelineConfig(**kw)

    def test_defaults(self):
        c = PipelineConfig()
        assert (c.degree, c.grid, c.kink_window, c.gamma_clamp, c.mode) == (4, (30, 30), 5, (0.1, 10.0), "single")
        assert c.kink_angle == pytest.approx(math.radians(30))

    def test_unknown_field(self):
        with pytest.raises(ValueError, match="unknown config"):
            PipelineConfig.from_dict({"degre": 3})

    @given(st.integers(2, 8), st.tuples(st.integers(2, 60), st.integers(2, 60)), st.none() | st.integers(0, 255),
           st.floats(0.01, 3.0), st.integers(1, 20), st.floats(0.01, 1.0), st.floats(1.0, 100.0),
           st.sampled_from(["book", "single"]), st.booleans(), st.integers(0, 16),
           st.none() | st.text(min_size=1, max_size=10))
    def test_file_round_trip(self, degree, grid, thr, angle, window, lo, hi, mode, printed, jobs, out):
        import tempfile
        from pathlib import Path
        c = PipelineConfig(degree=degree, grid=grid, threshold=thr, kink_angle=angle, kink_window=window,
                           gamma_clamp=(lo, hi), mode=mode, curvature_as_printed=printed, jobs=jobs, output=out)
        with tempfile.TemporaryDirectory() as d:
            path = Path(d) / "cfg.json"
            c.save(path)
            assert PipelineConfig.load(path) == c


class TestFlatten:
    def test_flat_page_identity(self):
        scene, spec = synth.scene_from_dict({"profile": "flat", "width": 400, "height": 500, "margin": 30})
        truth = synth.render(scene, spec)
        res = flatten(truth.image)
        assert synth.score(res.image, truth)["ssim"] >= 0.99

    def test_report(self, small_truth):
        res = flatten(small_truth.image, PipelineConfig(grid=(12, 14)))
        r = res.report
        assert r["grid"] == {"M": 12, "N": 14}
        assert r["output_size"] == [res.image.width, res.image.height]
        expected = {"grayscale", "binarize", "trace", "quadrilateral", "rectify_global", "split", "fit",
                    "evolve", "series", "lattice", "blocks", "warp", "recombine", "concatenate"}
        assert set(r["timings"]) == expected
        assert abs(sum(r["timings"].values()) - r["total_seconds"]) <= 0.05 * r["total_seconds"]
        (surf,) = r["surfaces"]
        assert set(surf["fit_rms"]) == {"top", "bottom", "left", "right"}
        assert not surf["side_not_vertical"]
        assert isinstance(r["clamped_gamma"], int)

    def test_lattice_shape_and_layout(self, small_truth):
        res = flatten(small_truth.image, PipelineConfig(grid=(9, 7)))
        (s,) = res.surfaces
        assert s.lattice.points.shape == (63, 2)
        assert res.image.width == s.layout.cols * s.layout.cell_w
        assert res.image.height == s.layout.rows * s.layout.cell_h
        g = s.lattice.grid
        assert np.all(np.diff(g[..., 0], axis=1) > 0) and np.all(np.diff(g[..., 1], axis=0) > 0)

    def test_deterministic_across_jobs(self, small_truth):
        a = flatten(small_truth.image, PipelineConfig(jobs=1))
        b = flatten(small_truth.image, PipelineConfig(jobs=3))
        c = flatten(small_truth.image, PipelineConfig(jobs=1))
        assert a.image == b.image == c.image

    def test_rgb_input(self, small_truth):
        rgb = Raster(np.dstack([small_truth.image.data] * 3))
        res = flatten(rgb)
        assert res.image.channels == 3
        gray = flatten(small_truth.image)
        assert np.abs(res.image.data[..., 0].astype(int) - gray.image.data.astype(int)).max() <= 1

    def test_blank_image_fails_at_binarize(self):
        with pytest.raises(StageError) as err:
            flatten(Raster(np.full((50, 50), 128, np.uint8)))
        assert err.value.stage == "binarize"
        assert HINTS["binarize"] in str(err.value)

    def test_single_page_in_book_mode(self, small_truth):
        with pytest.raises(StageError) as err:
            flatten(small_truth.image, PipelineConfig(mode="book"))
        assert err.value.stage == "kinks"

    def test_manual_threshold(self, small_truth):
        res = flatten(small_truth.image, PipelineConfig(threshold=100))
        assert res.report["threshold"] == 100

    def test_debug_and_tiles(self, small_truth, tmp_path):
        cfg = PipelineConfig(grid=(5, 4), debug_dir=str(tmp_path / "dbg"), tiles_dir=str(tmp_path / "tiles"))
        flatten(small_truth.image, cfg)
        names = {p.name for p in (tmp_path / "dbg").iterdir()}
        assert {"overlay.png", "rectified.png", "landmarks.json", "lattice.json", "curves.json"} <= names
        assert len(list((tmp_path / "tiles").iterdir())) == 4 * 3


class TestBook:
    def test_two_surfaces_concatenated(self, book_run):
        _, _, truth, res = book_run
        assert len(res.surfaces) == 2
        assert res.outline.is_book
        assert res.image.width == sum(s.layout.cols * s.layout.cell_w for s in res.surfaces)
        assert len(res.report["surfaces"]) == 2
