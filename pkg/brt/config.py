from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from brt.driving import ColourKernel, DirectionalMeasure, DrivingMeasure
from brt.estimators import DEFAULT_N_MC, DEFAULT_STRATA, ObservationScheme
from brt.geometry import Cell, Polytope
from brt.kernels import (
    BetaTable,
    Block,
    ConstantDensity,
    Cutoff,
    Directional,
    Kernel,
    MutationSizeBalanceAging,
    SizeBalance,
    Stit,
    UnitRate,
    check_edge_convention,
)
from brt.simulator import DEFAULT_EVENT_CAP, Tessellation, from_cells, shifted_lattice, single_cell
from brt.utils import INITIAL_STREAM, RandomStreams

KERNEL_TYPES = (
    "stit",
    "constant",
    "size_balance",
    "unit_rate",
    "mutation",
    "directional",
    "block",
    "cutoff",
)


class ConfigError(ValueError):
    pass


def _number(data: Mapping[str, Any], key: str, default: Optional[float] = None) -> float:
    if key not in data:
        if default is None:
            raise ConfigError(f"missing required number {key!r}")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key!r} must be a number")
    if not math.isfinite(value):
        raise ConfigError(f"{key!r} must be finite")
    return float(value)


def _integer(data: Mapping[str, Any], key: str, default: int) -> int:
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key!r} must be an integer")
    return value


def _mapping(data: Mapping[str, Any], key: str, required: bool = False) -> dict[str, Any]:
    if key not in data:
        if required:
            raise ConfigError(f"missing required section {key!r}")
        return {}
    value = data[key]
    if not isinstance(value, dict):
        raise ConfigError(f"{key!r} must be an object")
    return dict(value)


def _vector(value: Any, key: str) -> list[float]:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{key!r} must be a list of numbers")
    return [float(v) for v in value]


def _matrix(value: Any, key: str) -> list[list[float]]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key!r} must be a list of rows")
    return [_vector(row, key) for row in value]


# ---------------------------------------------------------------------------
# Fragment builders
# ---------------------------------------------------------------------------


def build_window(entry: Mapping[str, Any], dimension: int) -> Polytope:
    try:
        if "side" in entry:
            return Polytope.cube(dimension, _number(entry, "side"))
        if "interval" in entry:
            a, b = _vector(entry["interval"], "interval")
            return Polytope.interval(a, b)
        if "lo" in entry and "hi" in entry:
            return Polytope.box(_vector(entry["lo"], "lo"), _vector(entry["hi"], "hi"))
        if "vertices" in entry:
            return Polytope.polygon(_matrix(entry["vertices"], "vertices"))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"invalid window: {e}") from None
    raise ConfigError("window needs 'side', 'interval', 'lo'/'hi' or 'vertices'")


def build_driving(fragment: Mapping[str, Any], dimension: int, n_colours: int) -> DrivingMeasure:
    intensity = _number(fragment, "intensity", 1.0)
    directional_entry = _mapping(fragment, "directional")
    colour_entry = _mapping(fragment, "colour_kernel")
    try:
        if dimension == 1:
            directional = DirectionalMeasure.line()
        else:
            kind = directional_entry.get("type", "isotropic")
            atoms = [
                (_number(a, "theta"), _number(a, "weight"))
                for a in directional_entry.get("atoms", [])
            ]
            if kind == "isotropic":
                weight = _number(directional_entry, "iso_weight", 1.0)
                directional = DirectionalMeasure.isotropic(weight)
            elif kind == "atoms":
                directional = DirectionalMeasure.from_atoms(atoms)
            elif kind == "mixture":
                directional = DirectionalMeasure.mixture(
                    _number(directional_entry, "iso_weight"), atoms
                )
            else:
                raise ConfigError(f"unknown directional type {kind!r}")
        kind = colour_entry.get("type", "product")
        if kind == "product":
            nu = colour_entry.get("nu", [1.0 / n_colours] * n_colours)
            colour = ColourKernel.product(_vector(nu, "nu"))
        elif kind == "matrix":
            per_atom = [
                None if m is None else _matrix(m, "per_atom")
                for m in colour_entry.get("per_atom", [])
            ]
            colour = ColourKernel.matrix(_matrix(colour_entry.get("rows"), "rows"), per_atom)
        else:
            raise ConfigError(f"unknown colour kernel type {kind!r}")
        if colour.n_colours != n_colours:
            raise ConfigError(
                f"colour kernel has {colour.n_colours} colours, the alphabet has {n_colours}"
            )
        return DrivingMeasure(directional, colour, intensity)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"invalid driving measure: {e}") from None


def build_beta(entry: Mapping[str, Any]) -> BetaTable:
    kind = entry.get("type", "rising")
    if kind in ("rising", "figure2"):
        return BetaTable.rising()
    if kind == "constant":
        return BetaTable.constant(_number(entry, "value"))
    if kind == "grid":
        ages = tuple(_vector(entry.get("ages"), "ages"))
        fractions = tuple(_vector(entry.get("fractions"), "fractions"))
        values = tuple(tuple(row) for row in _matrix(entry.get("values"), "values"))
        return BetaTable(ages, fractions, values)
    raise ConfigError(f"unknown beta type {kind!r}")


def build_kernel(
    fragment: Mapping[str, Any],
    driving: DrivingMeasure,
    edge_convention: str = "neutral",
) -> Kernel:
    kind = fragment.get("type")
    if kind not in KERNEL_TYPES:
        raise ConfigError(f"unknown kernel type {kind!r}")
    try:
        if kind == "stit":
            return Stit()
        if kind == "constant":
            return ConstantDensity(_number(fragment, "a"))
        if kind == "size_balance":
            return SizeBalance(_number(fragment, "epsilon"))
        if kind == "unit_rate":
            return UnitRate(driving)
        if kind == "mutation":
            if driving.n_colours != 2 or driving.colour.nu is None:
                raise ConfigError("mutation kernel needs a product colour kernel on two colours")
            nu = driving.colour.nu
            return MutationSizeBalanceAging(
                _number(fragment, "epsilon"),
                build_beta(_mapping(fragment, "beta")),
                (nu[0], nu[1]),
                edge_convention,
            )
        if kind == "directional":
            bound = fragment.get("bound")
            return Directional(None if bound is None else _number(fragment, "bound"))
        inner = build_kernel(_mapping(fragment, "inner", required=True), driving, edge_convention)
        if kind == "block":
            return Block(inner, _number(fragment, "n"), _number(fragment, "corridor"))
        return Cutoff(inner, _number(fragment, "delta"))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"invalid {kind} kernel: {e}") from None


def build_initial(
    entry: Mapping[str, Any],
    window: Polytope,
    rng: np.random.Generator,
    nu: Optional[Sequence[float]] = None,
) -> Tessellation:
    kind = entry.get("type", "single")
    try:
        if kind == "single":
            return single_cell(window, _integer(entry, "colour", 0))
        if kind == "lattice":
            return shifted_lattice(window, rng, _number(entry, "spacing", 1.0), nu)
        if kind == "cells":
            cells = []
            for item in entry.get("cells", []):
                if "interval" in item:
                    a, b = _vector(item["interval"], "interval")
                    p = Polytope.interval(a, b)
                else:
                    p = Polytope.polygon(_matrix(item.get("vertices"), "vertices"))
                cells.append(Cell(p, _integer(item, "colour", 0)))
            return from_cells(window, cells)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"invalid initial tessellation: {e}") from None
    raise ConfigError(f"unknown initial tessellation type {kind!r}")


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Setup:
    """Library objects built from a RunConfig."""

    window: Polytope
    driving: DrivingMeasure
    kernel: Kernel
    scheme: Optional[ObservationScheme]


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    window: dict[str, Any]
    kernel: dict[str, Any]
    colours: tuple[str, ...] = ("0",)
    driving: dict[str, Any] = field(default_factory=dict)
    initial: dict[str, Any] = field(default_factory=lambda: {"type": "single"})
    t_end: float = 1.0
    seed: int = 0
    replicates: int = 1
    observation: Optional[dict[str, Any]] = None
    event_cap: int = DEFAULT_EVENT_CAP
    edge_convention: str = "neutral"
    strata: int = DEFAULT_STRATA
    n_mc: int = DEFAULT_N_MC
    output: dict[str, Any] = field(default_factory=dict)

    @property
    def n_colours(self) -> int:
        return len(self.colours)

    def streams(self) -> RandomStreams:
        return RandomStreams(self.seed)

    def build(self) -> Setup:
        window = build_window(self.window, self.dimension)
        if window.dimension != self.dimension:
            raise ConfigError("window dimension does not match 'dimension'")
        driving = build_driving(self.driving, self.dimension, self.n_colours)
        kernel = build_kernel(self.kernel, driving, self.edge_convention)
        scheme = None
        if self.observation is not None:
            side = _number(self.observation, "side")
            margin = _number(self.observation, "margin", 0.0)
            if margin < kernel.range:
                raise ConfigError(
                    f"observation margin {margin!r} is smaller than "
                    f"the kernel range {kernel.range!r}"
                )
            try:
                scheme = ObservationScheme(window, side, margin)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        return Setup(window, driving, kernel, scheme)

    def initial_for(self, setup: Setup, replicate: int) -> Tessellation:
        rng = self.streams().child(replicate, INITIAL_STREAM).generator()
        return build_initial(self.initial, setup.window, rng, setup.driving.colour.nu)

    def target_kernel(self, setup: Setup, fragment: Optional[Mapping[str, Any]]) -> Kernel:
        if fragment is None:
            return setup.kernel
        return build_kernel(fragment, setup.driving, self.edge_convention)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "dimension": self.dimension,
            "window": self.window,
            "colours": list(self.colours),
            "lambda": self.driving,
            "kernel": self.kernel,
            "initial": self.initial,
            "t_end": self.t_end,
            "seed": self.seed,
            "replicates": self.replicates,
            "event_cap": self.event_cap,
            "edge_convention": self.edge_convention,
            "estimator": {"strata": self.strata, "n_mc": self.n_mc},
            "output": self.output,
        }
        if self.observation is not None:
            data["observation"] = self.observation
        return data


def parse_config(data: Mapping[str, Any]) -> RunConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a JSON object")
    dimension = _integer(data, "dimension", 0)
    if dimension not in (1, 2):
        raise ConfigError("'dimension' must be 1 or 2")
    colours = data.get("colours", ["0"])
    if not isinstance(colours, list) or not colours or len(set(map(str, colours))) != len(colours):
        raise ConfigError("'colours' must be a non-empty list of distinct labels")
    t_end = _number(data, "t_end", 1.0)
    if not 0.0 <= t_end <= 1.0:
        raise ConfigError("'t_end' must lie in [0, 1]")
    replicates = _integer(data, "replicates", 1)
    if replicates < 1:
        raise ConfigError("'replicates' must be at least 1")
    event_cap = _integer(data, "event_cap", DEFAULT_EVENT_CAP)
    if event_cap < 1:
        raise ConfigError("'event_cap' must be positive")
    estimator = _mapping(data, "estimator")
    strata = _integer(estimator, "strata", DEFAULT_STRATA)
    n_mc = _integer(estimator, "n_mc", DEFAULT_N_MC)
    if strata < 1 or n_mc < 1:
        raise ConfigError("estimator 'strata' and 'n_mc' must be positive")
    edge = data.get("edge_convention", "neutral")
    if not isinstance(edge, str):
        raise ConfigError("'edge_convention' must be a string")
    try:
        check_edge_convention(edge)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    observation = data.get("observation")
    if observation is not None and not isinstance(observation, dict):
        raise ConfigError("'observation' must be an object")
    kernel = _mapping(data, "kernel", required=True)
    if "type" not in kernel:
        raise ConfigError("kernel needs a 'type'")
    config = RunConfig(
        dimension=dimension,
        window=_mapping(data, "window", required=True),
        kernel=kernel,
        colours=tuple(str(c) for c in colours),
        driving=_mapping(data, "lambda"),
        initial=_mapping(data, "initial") or {"type": "single"},
        t_end=t_end,
        seed=_integer(data, "seed", 0),
        replicates=replicates,
        observation=observation,
        event_cap=event_cap,
        edge_convention=edge,
        strata=strata,
        n_mc=n_mc,
        output=_mapping(data, "output"),
    )
    config.build()
    return config


def load_config(path: Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e.msg} (line {e.lineno})") from None
    return parse_config(data)
