import json
from pathlib import Path

import pytest

from brt.config import ConfigError, load_config, parse_config
from brt.kernels import Block, ConstantDensity, MutationSizeBalanceAging, SizeBalance, Stit


def _base(**overrides) -> dict:
    data = {
        "dimension": 2,
        "window": {"side": 4.0},
        "kernel": {"type": "size_balance", "epsilon": 0.5},
        "t_end": 1.0,
        "seed": 3,
        "replicates": 2,
    }
    data.update(overrides)
    return data


def test_parse_minimal_config() -> None:
    config = parse_config(_base())
    setup = config.build()
    assert setup.kernel == SizeBalance(0.5)
    assert setup.scheme is None
    assert setup.driving.dimension == 2
    assert config.strata == 32


def test_round_trip_through_dict() -> None:
    config = parse_config(
        _base(
            observation={"side": 2.0, "margin": 1.0},
            estimator={"strata": 4, "n_mc": 8},
            initial={"type": "lattice", "spacing": 1.0},
        )
    )
    assert parse_config(config.to_dict()) == config


def test_load_config(tmp_path: Path) -> None:
    path = tmp_path / "run.json"
    path.write_text(json.dumps(_base()), encoding="utf-8")
    assert load_config(path).seed == 3
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


@pytest.mark.parametrize(
    "overrides",
    [
        {"dimension": 3},
        {"t_end": 1.5},
        {"replicates": 0},
        {"kernel": {"type": "voronoi"}},
        {"kernel": {"epsilon": 0.5}},
        {"kernel": {"type": "size_balance", "epsilon": 2.0}},
        {"window": {"radius": 1.0}},
        {"colours": ["a", "a"]},
        {"edge_convention": "wrap"},
        {"observation": {"side": 4.0, "margin": 1.0}},
        {"seed": "seven"},
    ],
)
def test_invalid_configs(overrides: dict) -> None:
    with pytest.raises(ConfigError):
        parse_config(_base(**overrides))


def test_margin_must_cover_kernel_range() -> None:
    data = _base(
        colours=["-", "+"],
        kernel={"type": "mutation", "epsilon": 0.5, "beta": {"type": "rising"}},
        observation={"side": 2.0, "margin": 0.0},
    )
    with pytest.raises(ConfigError):
        parse_config(data)
    data["observation"]["margin"] = 1.0
    assert isinstance(parse_config(data).build().kernel, MutationSizeBalanceAging)


def test_nested_kernels_and_one_dimensional_window() -> None:
    config = parse_config(
        _base(
            dimension=1,
            window={"interval": [0.0, 10.0]},
            kernel={
                "type": "block",
                "n": 2.0,
                "corridor": 1.0,
                "inner": {"type": "constant", "a": 2.0},
            },
        )
    )
    kernel = config.build().kernel
    assert kernel == Block(ConstantDensity(2.0), 2.0, 1.0)


def test_target_kernel_override() -> None:
    config = parse_config(_base())
    setup = config.build()
    assert config.target_kernel(setup, None) is setup.kernel
    assert config.target_kernel(setup, {"type": "stit"}) == Stit()


def test_initial_tessellations_are_reproducible() -> None:
    config = parse_config(_base(initial={"type": "lattice"}))
    setup = config.build()
    assert config.initial_for(setup, 0) == config.initial_for(setup, 0)
    explicit = parse_config(
        _base(
            window={"lo": [0.0, 0.0], "hi": [2.0, 1.0]},
            initial={
                "type": "cells",
                "cells": [
                    {"vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]},
                    {"vertices": [[1, 0], [2, 0], [2, 1], [1, 1]], "colour": 0},
                ],
            },
        )
    )
    assert len(explicit.initial_for(explicit.build(), 0)) == 2


def test_mutation_needs_two_colours() -> None:
    with pytest.raises(ConfigError):
        parse_config(_base(kernel={"type": "mutation", "epsilon": 0.5}))
