"""Flatten photographed curved pages with a contour-estimated quadrilateral mesh."""

from .contour import Contour, PageOutline, SurfaceBoundary, approx_quadrilateral, find_kinks, split_surfaces, trace_borders
from .errors import PageflatError, StageError
from .mesh import GridLattice, GridSpec, QuadBlock, ScaleSeries, build_lattice, build_series, extract_blocks, interval_points, scale_factor
from .pipeline import FlattenResult, PipelineConfig, flatten
from .polyfit import CurveFamily, PolyCurve, curvature, deriv, eval_poly, evolve_family, fit, inflections
from .raster import BinaryMask, Raster, binarize_otsu, sample_bilinear, to_grayscale
from .warp import Homography, TileLayout, rectify_global, recombine, solve_homography, warp_block

__version__ = "0.1.0"

__all__ = [
    "BinaryMask", "Contour", "CurveFamily", "FlattenResult", "GridLattice", "GridSpec", "Homography",
    "PageOutline", "PageflatError", "PipelineConfig", "PolyCurve", "QuadBlock", "Raster", "ScaleSeries",
    "StageError", "SurfaceBoundary", "TileLayout", "approx_quadrilateral", "binarize_otsu", "build_lattice",
    "build_series", "curvature", "deriv", "eval_poly", "evolve_family", "extract_blocks", "find_kinks", "fit",
    "flatten", "inflections", "interval_points", "rectify_global", "recombine", "sample_bilinear",
    "scale_factor", "solve_homography", "split_surfaces", "to_grayscale", "trace_borders", "warp_block",
]
