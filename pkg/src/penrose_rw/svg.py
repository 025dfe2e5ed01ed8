"""Self-contained SVG rendering of a patch."""
from __future__ import annotations

import numpy as np

from .tiling import Patch

SHAPE_COLORS = {True: "#e8b04a", False: "#4a7fb0"}
CLASS_COLORS = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3",
                "#fdb462", "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd"]


def _ramp(t: float) -> str:
    # linear white -> dark red ramp
    t = min(max(t, 0.0), 1.0)
    r = 255 - int(round(t * (255 - 140)))
    g = 255 - int(round(t * 255))
    b = 255 - int(round(t * 255))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(patch: Patch, color_by: str = "shape", chi: np.ndarray | None = None,
               scale: float = 10.0, stroke: float = 0.05) -> str:
    """SVG text for the patch; coordinates are rounded to 1e-3 so output is diff-stable."""
    if color_by == "chi":
        if chi is None:
            raise ValueError("color_by='chi' needs a corrector field")
        mag = np.hypot(chi[:, 0], chi[:, 1])
        top = mag.max() if mag.max() > 0 else 1.0
        fills = [_ramp(m / top) for m in mag]
    elif color_by == "shape":
        fills = [SHAPE_COLORS[bool(t)] for t in patch.thick]
    elif color_by == "class":
        fills = [CLASS_COLORS[c - 1] for c in patch.rotation_classes]
    else:
        raise ValueError(f"unknown color_by {color_by!r}")
    polys = patch.polygons()
    r = patch.radius + 1.0
    size = 2 * r * scale
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}" '
           f'viewBox="{-r:.3f} {-r:.3f} {2 * r:.3f} {2 * r:.3f}">',
           f'<g stroke="#222" stroke-width="{stroke}" stroke-linejoin="round" transform="scale(1,-1)">']
    for poly, fill in zip(polys, fills):
        pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in poly)
        out.append(f'<polygon points="{pts}" fill="{fill}"/>')
    out.append('<circle cx="0" cy="0" r="0.12" fill="#000"/>')
    out.append("</g></svg>")
    return "\n".join(out) + "\n"


def write_svg(patch: Patch, path, **kw) -> None:
    with open(path, "w") as fh:
        fh.write(render_svg(patch, **kw))
