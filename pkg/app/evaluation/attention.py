"""Mask-based localization of attention and CNN saliency."""

import numpy as np

from app.utils.exceptions import DimensionError


def token_saliency(attention_maps: np.ndarray) -> np.ndarray:
    """L x B x m x u x u softmax maps -> B x u attention received per token.

    Column mean of each map, averaged over layers and heads; rows sum to 1.
    """
    maps = np.asarray(attention_maps, dtype=np.float64)
    if maps.ndim != 5 or maps.shape[-1] != maps.shape[-2]:
        raise DimensionError("token_saliency", maps.shape, reason="expected L x B x m x u x u")
    received = maps.mean(axis=3)              # L x B x m x u
    return received.mean(axis=(0, 2))


def activation_saliency(feature_map: np.ndarray) -> np.ndarray:
    """B x h x w x d feature map -> B x u normalized per-cell activation magnitude.

    A map with no activation anywhere falls back to uniform.
    """
    fmap = np.asarray(feature_map, dtype=np.float64)
    if fmap.ndim != 4:
        raise DimensionError("activation_saliency", fmap.shape, reason="expected B x h x w x d")
    b, h, w, _ = fmap.shape
    magnitude = np.linalg.norm(fmap, axis=-1).reshape(b, h * w)
    total = magnitude.sum(axis=1, keepdims=True)
    uniform = np.full_like(magnitude, 1.0 / (h * w))
    return np.where(total > 0, magnitude / np.where(total > 0, total, 1.0), uniform)


def _grid_side(u: int, side: int) -> int:
    grid = int(round(np.sqrt(u)))
    if grid * grid != u or side % grid:
        raise DimensionError("attention_overlap", (u,), (side, side),
                             reason="token count does not factor onto the mask grid")
    return grid


def upsample_saliency(saliency: np.ndarray, side: int) -> np.ndarray:
    """B x u token weights -> B x S x S nearest-neighbor map normalized to sum 1."""
    saliency = np.asarray(saliency, dtype=np.float64)
    b, u = saliency.shape
    grid = _grid_side(u, side)
    cell = side // grid
    upsampled = np.repeat(np.repeat(saliency.reshape(b, grid, grid), cell, axis=1), cell, axis=2)
    total = upsampled.sum(axis=(1, 2), keepdims=True)
    return upsampled / np.where(total > 0, total, 1.0)


def overlap_per_sample(saliency: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Fraction of each image's normalized saliency mass inside its object mask."""
    masks = np.asarray(masks)
    if masks.ndim != 3 or masks.shape[1] != masks.shape[2] or masks.shape[0] != saliency.shape[0]:
        raise DimensionError("attention_overlap", saliency.shape, masks.shape)
    heat = upsample_saliency(saliency, masks.shape[1])
    return (heat * (masks > 0)).sum(axis=(1, 2))


def attention_overlap(attention_maps: np.ndarray, masks: np.ndarray) -> float:
    """Batch mean of the attention mass that falls inside the object masks."""
    return float(overlap_per_sample(token_saliency(attention_maps), masks).mean())
