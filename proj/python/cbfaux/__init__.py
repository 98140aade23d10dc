"""Barrier-function safety filters with auxiliary excitation constraints."""

import json
from pathlib import Path

from . import _core
from ._core import SchemaError, gate_polynomial, gate_rational, gate_velocity, solve_qp

__all__ = [
    "SchemaError",
    "effective_config",
    "gate_polynomial",
    "gate_rational",
    "gate_velocity",
    "initial_states",
    "load_text",
    "simulate",
    "solve_qp",
]


def load_text(scenario):
    """Scenario as JSON text, from a path, a dict, or text."""
    if isinstance(scenario, dict):
        return json.dumps(scenario)
    if isinstance(scenario, Path) or (isinstance(scenario, str) and not scenario.lstrip().startswith("{")):
        return Path(scenario).read_text()
    return scenario


def effective_config(scenario):
    return json.loads(_core.effective_config(load_text(scenario)))


def initial_states(scenario, sweep=False):
    return _core.initial_states(load_text(scenario), sweep)


def simulate(scenario, index=0, with_summary=True):
    """Run one initial state; arrays are numpy, summary is a dict."""
    out = _core.simulate(load_text(scenario), index, with_summary)
    if with_summary:
        out["summary"] = json.loads(out["summary"])
    return out
