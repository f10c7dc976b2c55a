"""Binary shape masks; the geometry of a class is identical in every domain."""

from typing import Callable, Dict, List

import numpy as np

from app.utils.exceptions import ConfigError, ContractError

MIN_AREA = 0.05
MAX_AREA = 0.60
_MAX_TRIES = 64

# Each generator receives rotated, centered coordinates (x, y) and the radius r.
MaskFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


def _disk(x, y, r):
    return x ** 2 + y ** 2 <= r ** 2


def _square(x, y, r):
    return (np.abs(x) <= r) & (np.abs(y) <= r)


def _triangle(x, y, r):
    # apex at (0, -r), base at y = 0.8r
    height = 1.8 * r
    half_width = r * (y + r) / height
    return (y >= -r) & (y <= 0.8 * r) & (np.abs(x) <= half_width)


def _cross(x, y, r):
    w = 0.35 * r
    return ((np.abs(x) <= r) & (np.abs(y) <= w)) | ((np.abs(x) <= w) & (np.abs(y) <= r))


def _ring(x, y, r):
    d2 = x ** 2 + y ** 2
    return (d2 <= r ** 2) & (d2 >= (0.55 * r) ** 2)


def _bar(x, y, r):
    return (np.abs(x) <= r) & (np.abs(y) <= 0.4 * r)


def _l_shape(x, y, r):
    inside = (np.abs(x) <= r) & (np.abs(y) <= r)
    return inside & ((x <= -0.3 * r) | (y >= 0.3 * r))


def _diamond(x, y, r):
    return np.abs(x) + np.abs(y) <= r


def _x_cross(x, y, r):
    inside = (np.abs(x) <= r) & (np.abs(y) <= r)
    return inside & ((np.abs(x - y) <= 0.5 * r) | (np.abs(x + y) <= 0.5 * r))


def _semicircle(x, y, r):
    return (x ** 2 + y ** 2 <= r ** 2) & (y <= 0.0)


SHAPES: Dict[str, MaskFn] = {
    "disk": _disk,
    "square": _square,
    "triangle": _triangle,
    "cross": _cross,
    "ring": _ring,
    "bar": _bar,
    "l_shape": _l_shape,
    "diamond": _diamond,
    "x_cross": _x_cross,
    "semicircle": _semicircle,
}
SHAPE_NAMES: List[str] = list(SHAPES)
NUM_SHAPES = len(SHAPE_NAMES)


def shape_name(shape_id: int) -> str:
    if not 0 <= shape_id < NUM_SHAPES:
        raise ConfigError(f"shape id {shape_id} outside [0, {NUM_SHAPES})")
    return SHAPE_NAMES[shape_id]


def draw_mask(shape_id: int, side: int, rng: np.random.Generator) -> np.ndarray:
    """Random placement, scale and small rotation of one shape as a boolean ``side x side`` mask."""
    fn = SHAPES[shape_name(shape_id)]
    coords = np.arange(side, dtype=np.float64) + 0.5
    grid_x, grid_y = np.meshgrid(coords, coords)
    for _ in range(_MAX_TRIES):
        r = rng.uniform(0.22, 0.30) * side
        slack = max(0.0, side / 2 - 1 - r * np.sqrt(2.0))
        cx, cy = side / 2 + rng.uniform(-slack, slack, size=2)
        theta = rng.uniform(-0.3, 0.3)
        dx, dy = grid_x - cx, grid_y - cy
        x = np.cos(theta) * dx + np.sin(theta) * dy
        y = -np.sin(theta) * dx + np.cos(theta) * dy
        mask = fn(x, y, r)
        if MIN_AREA <= mask.mean() <= MAX_AREA:
            return mask
    raise ContractError(f"could not draw a '{SHAPE_NAMES[shape_id]}' mask with valid area at side {side}")
