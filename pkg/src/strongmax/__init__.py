"""Strong maximal functions, strong Muckenhoupt weights and sparse rectangle covers on grids."""
from .grid import (
    DegenerateWeightError,
    DimensionError,
    Grid,
    GridError,
    PrefixSum,
    Rect,
    build_prefix,
    dilate_perp,
    mask_measure,
    project_parallel,
    project_perp,
    rect_average,
    slice_rect,
    union_measure,
)
from .operators import (
    MaximalResult,
    composition_maximal,
    cube_maximal,
    directional_maximal,
    hl_maximal_1d,
    level_measure,
    strong_maximal,
)

__version__ = "0.1.0"
