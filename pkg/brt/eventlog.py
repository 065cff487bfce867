"""JSONL event logs.

Line 1 is the header, line 2 the initial tessellation, then one line per
division event (``{"s", "parent", "u", "r", ...}``) or immigration
(``{"immigrant": {...}}``) in time order. Floats are written with full repr
precision so a replay rebuilds every cell bit for bit.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

from brt.geometry import BicolouredHyperplane, Cell, Polytope, SpatialHyperplane
from brt.simulator import (
    BranchingTessellation,
    DivisionEvent,
    Immigration,
    Tessellation,
    build_history,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"


class LogFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LogHeader:
    dimension: int
    window: Polytope
    colours: tuple[str, ...] = ("0",)
    seed: int = 0
    kernel: dict[str, Any] = field(default_factory=dict)
    driving: dict[str, Any] = field(default_factory=dict)
    t_end: float = 1.0
    replicate: int = 0
    schema_version: str = SCHEMA_VERSION


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def polytope_to_json(p: Polytope) -> dict[str, Any]:
    if p.dimension == 1:
        return {"interval": [p.vertices[0][0], p.vertices[1][0]]}
    return {"vertices": [list(v) for v in p.vertices]}


def polytope_from_json(data: dict[str, Any]) -> Polytope:
    if "interval" in data:
        a, b = data["interval"]
        return Polytope.interval(a, b)
    return Polytope(tuple(tuple(float(x) for x in v) for v in data["vertices"]))


def _cell_to_json(c: Cell) -> dict[str, Any]:
    return {
        "id": c.cell_id,
        **polytope_to_json(c.polytope),
        "colour": c.colour,
        "birth_time": c.birth_time,
    }


def _cell_from_json(data: dict[str, Any]) -> Cell:
    return Cell(
        polytope_from_json(data),
        int(data.get("colour", 0)),
        float(data.get("birth_time", 0.0)),
        int(data["id"]),
    )


def _event_to_json(e: DivisionEvent) -> dict[str, Any]:
    h = e.hyperplane
    return {
        "s": e.time,
        "parent": e.parent_id,
        "u": list(h.normal),
        "r": h.offset,
        "col_plus": h.colour_plus,
        "col_minus": h.colour_minus,
        "child_plus": e.child_plus_id,
        "child_minus": e.child_minus_id,
    }


def _event_from_json(data: dict[str, Any]) -> DivisionEvent:
    spatial = SpatialHyperplane(tuple(float(x) for x in data["u"]), float(data["r"]))
    h = BicolouredHyperplane(spatial, int(data["col_plus"]), int(data["col_minus"]))
    return DivisionEvent(
        float(data["s"]), int(data["parent"]), h, int(data["child_plus"]), int(data["child_minus"])
    )


def iter_lines(history: BranchingTessellation, header: LogHeader) -> Iterator[str]:
    yield _dumps(
        {
            "schema_version": header.schema_version,
            "dimension": header.dimension,
            "window": polytope_to_json(header.window),
            "colours": list(header.colours),
            "seed": header.seed,
            "replicate": header.replicate,
            "t_end": header.t_end,
            "kernel": header.kernel,
            "lambda": header.driving,
        }
    )
    yield _dumps({"cells": [_cell_to_json(c) for c in history.initial.cells]})
    pending = list(history.immigrations)
    for e in history.events:
        while pending and pending[0].time <= e.time:
            yield _dumps({"immigrant": _cell_to_json(pending.pop(0).cell)})
        yield _dumps(_event_to_json(e))
    for m in pending:
        yield _dumps({"immigrant": _cell_to_json(m.cell)})


def dumps_log(history: BranchingTessellation, header: LogHeader) -> str:
    return "".join(line + "\n" for line in iter_lines(history, header))


def write_log(path: Path, history: BranchingTessellation, header: LogHeader) -> None:
    Path(path).write_text(dumps_log(history, header), encoding="utf-8")
    logger.info("wrote %d events to %s", len(history.events), path)


def _check_version(version: Any) -> None:
    if not isinstance(version, str):
        raise LogFormatError("header has no schema_version")
    major = version.split(".", 1)[0]
    if major != SCHEMA_VERSION.split(".", 1)[0]:
        raise LogFormatError(f"unsupported schema version {version!r}")


def read_log_stream(stream: TextIO) -> tuple[LogHeader, BranchingTessellation]:
    lines = [line for line in stream.read().splitlines() if line.strip()]
    if len(lines) < 2:
        raise LogFormatError("log needs a header and an initial tessellation line")
    try:
        head = json.loads(lines[0])
        _check_version(head.get("schema_version"))
        window = polytope_from_json(head["window"])
        header = LogHeader(
            dimension=int(head["dimension"]),
            window=window,
            colours=tuple(str(c) for c in head.get("colours", ["0"])),
            seed=int(head.get("seed", 0)),
            kernel=dict(head.get("kernel", {})),
            driving=dict(head.get("lambda", {})),
            t_end=float(head.get("t_end", 1.0)),
            replicate=int(head.get("replicate", 0)),
            schema_version=head["schema_version"],
        )
        initial = Tessellation(
            window, tuple(_cell_from_json(c) for c in json.loads(lines[1])["cells"])
        )
        events: list[DivisionEvent] = []
        immigrations: list[Immigration] = []
        for number, line in enumerate(lines[2:], start=3):
            data = json.loads(line)
            if "immigrant" in data:
                cell = _cell_from_json(data["immigrant"])
                immigrations.append(Immigration(cell.birth_time, cell))
            elif "s" in data:
                events.append(_event_from_json(data))
            else:
                raise LogFormatError(f"line {number} is neither an event nor an immigrant")
    except LogFormatError:
        raise
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise LogFormatError(f"malformed event log: {e}") from None
    history = build_history(initial, events, header.t_end, immigrations)
    return header, history


def read_log(path: Path) -> tuple[LogHeader, BranchingTessellation]:
    with open(path, encoding="utf-8") as stream:
        return read_log_stream(stream)


def replicate_path(path: Path, index: int, total: int) -> Path:
    """``run.jsonl`` for a single replicate, ``run-0007.jsonl`` otherwise."""
    path = Path(path)
    if total <= 1:
        return path
    return path.with_name(f"{path.stem}-{index:04d}{path.suffix}")
