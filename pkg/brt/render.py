from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from jinja2 import Environment, PackageLoader, select_autoescape

from brt.simulator import Tessellation

DEFAULT_FILLS = ("#e8c547", "#30323d", "#4d5061", "#5c80bc", "#cdd1c4", "#c97b84")


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class RenderStyle:
    fills: tuple[str, ...] = DEFAULT_FILLS
    stroke: str = "#000000"
    stroke_width: float = 1.0
    canvas: int = 600
    show_time: bool = False

    def fill_for(self, colour: int) -> str:
        if colour >= len(self.fills):
            raise RenderError(f"no fill for colour label {colour}")
        return self.fills[colour]


@lru_cache(maxsize=1)
def _environment() -> Environment:
    return Environment(
        loader=PackageLoader("brt", "templates"),
        autoescape=select_autoescape(["j2"]),
        keep_trailing_newline=True,
    )


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def render_svg(
    tessellation: Tessellation,
    style: Optional[RenderStyle] = None,
    time: Optional[float] = None,
) -> str:
    """One filled polygon per cell; deterministic for identical input."""
    style = style or RenderStyle()
    window = tessellation.window
    if window.dimension != 2:
        raise RenderError("polygon frames need a planar tessellation")
    (x0, y0), (x1, y1) = window.bounds
    scale = style.canvas / max(x1 - x0, y1 - y0)
    width = round((x1 - x0) * scale)
    height = round((y1 - y0) * scale)
    cells = [
        {
            "id": c.cell_id,
            "fill": style.fill_for(c.colour),
            "points": " ".join(
                f"{_fmt((x - x0) * scale)},{_fmt((y1 - y) * scale)}" for x, y in c.polytope.vertices
            ),
        }
        for c in tessellation.cells
    ]
    return _environment().get_template("frame.svg.j2").render(
        width=width,
        height=height,
        style=style,
        cells=cells,
        stamp=_stamp(style, time),
    )


def render_bars(
    tessellation: Tessellation,
    style: Optional[RenderStyle] = None,
    time: Optional[float] = None,
) -> str:
    """A one-dimensional tessellation as a strip of adjacent bars."""
    style = style or RenderStyle()
    window = tessellation.window
    if window.dimension != 1:
        raise RenderError("bar strips need a one-dimensional tessellation")
    (a,), (b,) = window.vertices
    scale = style.canvas / (b - a)
    cells = [
        {
            "id": c.cell_id,
            "fill": style.fill_for(c.colour),
            "x": _fmt((c.polytope.vertices[0][0] - a) * scale),
            "width": _fmt((c.polytope.vertices[1][0] - c.polytope.vertices[0][0]) * scale),
        }
        for c in tessellation.cells
    ]
    return _environment().get_template("bars.svg.j2").render(
        width=style.canvas,
        height=80,
        bar_top=10,
        bar_height=40,
        style=style,
        cells=cells,
        stamp=_stamp(style, time),
    )


def _stamp(style: RenderStyle, time: Optional[float]) -> str:
    if not style.show_time or time is None:
        return ""
    return f"s = {time:.4f}"
