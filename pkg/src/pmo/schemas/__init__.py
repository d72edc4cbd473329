"""JSON schemas for problem, SDP, certificate and report files."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

NAMES = ("problem", "sdp_problem", "certificate", "report")


@lru_cache(maxsize=None)
def load(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(f"unknown schema {name!r}")
    return json.loads(resources.files(__package__).joinpath(f"{name}.json").read_text())


def validate(data, name: str):
    """Raise ``jsonschema.ValidationError`` if ``data`` does not match."""
    jsonschema.validate(data, load(name))
