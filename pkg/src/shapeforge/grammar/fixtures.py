"""Bundled reference data: the drone grammar and its evaluation criteria map."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .dsl import parse_grammar
from .model import Grammar

DRONE_4MOTOR = "4-motor Drone"
DRONE_2MOTOR = "2-motor Drone"

# Total primitive volume (density 1) above which a design counts as heavy.
DRONE_MASS_BOUND = 1.0e6


def drone_grammar_source() -> str:
    return resources.files("shapeforge.grammar").joinpath("data/drone.sg").read_text()


@lru_cache(maxsize=1)
def drone_grammar() -> Grammar:
    return parse_grammar(drone_grammar_source())


def drone_criteria_map() -> dict:
    raw = resources.files("shapeforge.grammar").joinpath("data/drone_criteria.json").read_text()
    return json.loads(raw)
