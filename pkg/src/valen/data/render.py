"""Rasterization of panels from attribute tuples.

Panels are 32x32 grayscale in [0, 1], drawn by supersampled polygon fill
(4x, box-filtered down), so sub-pixel rotation and jitter produce distinct
pixel arrays without changing reasoning identity.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw

from .shapes import glyph_vertices
from .types import AttributeTuple

PANEL_SIZE = 32
_SS = 4  # supersampling factor

# Glyph center anchors per count, chosen so glyphs stay disjoint and inside
# the panel for every size level under max jitter.
_ANCHORS = {
    1: [(16.0, 16.0)],
    2: [(9.5, 9.5), (22.5, 22.5)],
    3: [(9.0, 9.0), (23.0, 9.0), (16.0, 23.0)],
}

_RADII = {1: 3.0, 2: 4.25, 3: 5.5}


def glyph_centers(attrs: AttributeTuple) -> list[tuple[float, float]]:
    """Jitter-shifted glyph centers for a panel."""
    return [(x + attrs.jitter, y + attrs.jitter) for x, y in _ANCHORS[attrs.count]]


def render_panel(attrs: AttributeTuple, allow_extra_shapes: bool = False) -> np.ndarray:
    """Rasterize one panel; deterministic function of the attribute tuple."""
    attrs.validate(allow_extra_shapes=allow_extra_shapes)
    size = PANEL_SIZE * _SS
    img = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(img)
    radius = _RADII[attrs.size_level]
    for cx, cy in glyph_centers(attrs):
        verts = glyph_vertices(attrs.shape_type, radius, attrs.rotation_deg)
        poly = [((cx + vx) * _SS, (cy + vy) * _SS) for vx, vy in verts]
        draw.polygon(poly, fill=255)
    hi = np.asarray(img, dtype=np.float32) / 255.0
    panel = hi.reshape(PANEL_SIZE, _SS, PANEL_SIZE, _SS).mean(axis=(1, 3))
    return panel.astype(np.float32)
