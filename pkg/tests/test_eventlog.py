import io
import json
from pathlib import Path

import pytest

from brt.driving import DrivingMeasure
from brt.eventlog import (
    LogFormatError,
    LogHeader,
    dumps_log,
    read_log,
    read_log_stream,
    replicate_path,
    write_log,
)
from brt.geometry import Polytope
from brt.kernels import SizeBalance
from brt.simulator import (
    Tessellation,
    outer_boundary_path,
    simulate,
    simulate_conditional,
    single_cell,
)
from brt.utils import RandomStreams

WINDOW = Polytope.cube(2, 3.0)
ISO = DrivingMeasure.isotropic()
EVENT_KEYS = {"s", "parent", "u", "r", "col_plus", "col_minus", "child_plus", "child_minus"}


def _simulate(seed: int):
    return simulate(WINDOW, single_cell(WINDOW), SizeBalance(0.5), ISO, 1.0, RandomStreams(seed))


@pytest.fixture()
def history():
    return _simulate(17)


def _header(**overrides) -> LogHeader:
    values = {"dimension": 2, "window": WINDOW, "seed": 17, "kernel": {"type": "size_balance"}}
    values.update(overrides)
    return LogHeader(**values)


def test_log_layout(history) -> None:
    lines = dumps_log(history, _header()).splitlines()
    head = json.loads(lines[0])
    assert head["schema_version"] == "1.0"
    assert head["seed"] == 17
    assert "lambda" in head
    assert len(json.loads(lines[1])["cells"]) == 1
    assert len(lines) == 2 + len(history.events)
    assert set(json.loads(lines[2])) == EVENT_KEYS
    assert " " not in lines[2]


def test_replay_from_file_is_exact(tmp_path: Path, history) -> None:
    path = tmp_path / "run.jsonl"
    write_log(path, history, _header())
    header, again = read_log(path)
    assert header == _header()
    assert again.events == history.events
    assert again.leaves() == history.leaves()
    assert dumps_log(again, header) == path.read_text(encoding="utf-8")


def test_immigrants_are_logged() -> None:
    outer = _simulate(5)
    w = Polytope.cube(2, 2.0)
    path = outer_boundary_path(outer, w)
    inner = simulate_conditional(
        w, path, Tessellation(w, path.inner_initial), SizeBalance(0.5), ISO, outer, RandomStreams(6)
    )
    text = dumps_log(inner, _header(window=w))
    _, again = read_log_stream(io.StringIO(text))
    assert again.immigrations == inner.immigrations
    assert again.leaves() == inner.leaves()


def test_other_major_versions_are_rejected(history) -> None:
    text = dumps_log(history, _header(schema_version="2.0"))
    with pytest.raises(LogFormatError):
        read_log_stream(io.StringIO(text))
    minor = dumps_log(history, _header(schema_version="1.3"))
    header, _ = read_log_stream(io.StringIO(minor))
    assert header.schema_version == "1.3"


@pytest.mark.parametrize("text", ["", '{"schema_version": "1.0"}\n', "not json\n{}\n"])
def test_malformed_logs(text: str) -> None:
    with pytest.raises(LogFormatError):
        read_log_stream(io.StringIO(text))


def test_replicate_path() -> None:
    assert replicate_path(Path("out/run.jsonl"), 0, 1) == Path("out/run.jsonl")
    assert replicate_path(Path("out/run.jsonl"), 7, 10) == Path("out/run-0007.jsonl")
