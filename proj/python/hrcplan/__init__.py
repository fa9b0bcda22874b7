"""AND/OR-graph planning and simulation for human-robot cooperation."""

import json

from ._core import Error, NotFound, ParseError, ProtocolViolation, ValidationError
from ._core import Model as _Model
from ._core import Session as _Session

__all__ = [
    "Error",
    "NotFound",
    "ParseError",
    "ProtocolViolation",
    "ValidationError",
    "Scenario",
    "Session",
]


class Scenario:
    """A loaded and validated scenario, expanded into its executable model."""

    def __init__(self, model):
        self._model = model

    @classmethod
    def bundled(cls):
        return cls(_Model.bundled())

    @classmethod
    def from_yaml(cls, text):
        return cls(_Model.from_yaml(text))

    @classmethod
    def from_file(cls, path):
        return cls(_Model.from_file(str(path)))

    @property
    def name(self):
        return self._model.name

    @property
    def warnings(self):
        return list(self._model.warnings)

    def graph_ids(self):
        return list(self._model.graph_ids())

    def to_yaml(self):
        return self._model.to_yaml()

    def export_dot(self, graph):
        return self._model.export_dot(graph)

    def plan(self):
        """Initial best path per graph: {graph: {"cost", "arcs"} or None}."""
        return json.loads(self._model.plan_json())

    def simulate(self, seed=None, noise=True, max_time=None):
        return json.loads(self._model.simulate_json(seed=seed, noise=noise, max_time=max_time))

    def compare(self, seed=None, noise=True):
        return json.loads(self._model.compare_json(seed=seed, noise=noise))

    def report(self, seed=None, noise=True):
        return self._model.report_text(seed=seed, noise=noise)


class Session:
    """Stepped cooperation session; submit() takes the same event objects as the HTTP service."""

    def __init__(self, scenario, id="py", seed=None, noise=True, simulate_operator=False):
        self._s = _Session(scenario._model, id=id, seed=seed, noise=noise, simulate_operator=simulate_operator)

    @property
    def id(self):
        return self._s.id

    def snapshot(self):
        return json.loads(self._s.snapshot_json())

    def state_hash(self):
        return self._s.state_hash()

    def submit(self, event):
        return json.loads(self._s.submit_json(json.dumps(event)))

    def advance(self, by):
        return json.loads(self._s.advance_json(by))

    def log(self):
        return json.loads(self._s.log_json())
