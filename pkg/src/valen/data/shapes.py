"""Glyph vertex generators and geometric predicates."""

from __future__ import annotations

import numpy as np

# The "circle" is an 18-gon: dense enough to read as a disk at 32x32, but
# with a vertex count not divisible by 4, so a 90-degree rotation moves
# pixels (rotation must be visible for every shape).
_VERTEX_COUNTS = {"triangle": 3, "square": 4, "circle": 18}


def glyph_vertices(shape_type: str, radius: float, rotation_deg: float) -> np.ndarray:
    """Vertices [K, 2] of a glyph centered at the origin, +x rightward, +y down."""
    rot = np.deg2rad(rotation_deg)
    if shape_type == "star":
        # 5-point star: alternating outer/inner radii, concave by construction.
        angles = rot + np.arange(10) * (np.pi / 5.0) - np.pi / 2.0
        radii = np.where(np.arange(10) % 2 == 0, radius, 0.45 * radius)
        return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    if shape_type not in _VERTEX_COUNTS:
        raise ValueError(f"shape_type out of range: {shape_type!r}")
    k = _VERTEX_COUNTS[shape_type]
    start = {"triangle": -np.pi / 2.0, "square": -np.pi / 4.0, "circle": 0.0}[shape_type]
    angles = rot + start + np.arange(k) * (2.0 * np.pi / k)
    return np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)


def is_convex(vertices: np.ndarray) -> bool:
    """True iff the polygon given by consecutive vertices is convex."""
    v = np.asarray(vertices, dtype=np.float64)
    edges = np.roll(v, -1, axis=0) - v
    cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    cross = cross[np.abs(cross) > 1e-12]
    if cross.size == 0:
        return True
    return bool(np.all(cross > 0) or np.all(cross < 0))
