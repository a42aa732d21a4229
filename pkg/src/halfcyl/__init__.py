"""Two-image stitching: homography over the overlap, a cylinder bend and scale-matched resampling past it."""
from .geometry import (
    CylindricalParams,
    HalfCylWarp,
    Homography,
    ImageGrid,
    Point2,
    Side,
    Similarity,
    apply_homography,
    bilinear_sample,
    cyl_forward,
    cyl_inverse,
    half_cyl_forward,
    half_cyl_inverse,
    invert_homography,
)
from .pipeline import StitchConfig, StitchReport, run_stitch, stitch_images

__all__ = [
    "CylindricalParams",
    "HalfCylWarp",
    "Homography",
    "ImageGrid",
    "Point2",
    "Side",
    "Similarity",
    "StitchConfig",
    "StitchReport",
    "apply_homography",
    "bilinear_sample",
    "cyl_forward",
    "cyl_inverse",
    "half_cyl_forward",
    "half_cyl_inverse",
    "invert_homography",
    "run_stitch",
    "stitch_images",
]
