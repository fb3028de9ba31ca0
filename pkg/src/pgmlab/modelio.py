"""Model documents: the JSON file format shared by the CLI.

A document is a JSON object with optional sections.  ``variables`` +
``factors`` describe a factor graph (factor tables are flat lists with the
first scope variable varying fastest); ``dag``, ``ugm``, ``hmm``,
``kalman``, ``rbm``, and ``meanfield`` describe the other model kinds.
Each CLI command requires exactly the section(s) it operates on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .factors import DiscreteFactor
from .graphs import Dag, Ugm
from .messages import FactorGraph
from .samplers import RbmModel
from .sequential import DiscreteHmm, Gaussian1, KalmanModel
from .variational import GaussianTarget


@dataclass
class ModelDocument:
    variables: list[tuple[str, int]] = field(default_factory=list)
    factors: dict[str, DiscreteFactor] = field(default_factory=dict)
    dag: Dag | None = None
    ugm: Ugm | None = None
    hmm: DiscreteHmm | None = None
    kalman: KalmanModel | None = None
    rbm: RbmModel | None = None
    meanfield: GaussianTarget | None = None

    def factor_graph(self) -> FactorGraph:
        if not self.variables:
            raise ValidationError("document has no 'variables' section")
        if not self.factors:
            raise ValidationError("document has an empty or missing 'factors' section")
        return FactorGraph(self.variables, self.factors)

    def require(self, section: str):
        value = getattr(self, section)
        if value is None:
            raise ValidationError(f"document has no {section!r} section")
        return value


def _expect(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ValidationError(f"{where}: missing field {key!r}")
    return mapping[key]


def parse_model_dict(doc: dict) -> ModelDocument:
    if not isinstance(doc, dict):
        raise ValidationError("model document must be a JSON object")
    out = ModelDocument()

    for entry in doc.get("variables", []):
        name = str(_expect(entry, "name", "variables"))
        card = int(_expect(entry, "card", f"variable {name!r}"))
        out.variables.append((name, card))
    declared = dict(out.variables)
    if len(declared) != len(out.variables):
        raise ValidationError("duplicate variable names")

    for entry in doc.get("factors", []):
        name = str(_expect(entry, "name", "factors"))
        scope_names = [str(v) for v in _expect(entry, "scope", f"factor {name!r}")]
        for v in scope_names:
            if v not in declared:
                raise ValidationError(f"factor {name!r}: scope references undeclared variable {v!r}")
        scope = [(v, declared[v]) for v in scope_names]
        try:
            factor = DiscreteFactor(scope, _expect(entry, "values", f"factor {name!r}"))
        except ValidationError as exc:
            raise ValidationError(f"factor {name!r}: {exc}") from exc
        if name in out.factors:
            raise ValidationError(f"duplicate factor name {name!r}")
        out.factors[name] = factor
    if "factors" in doc and not out.factors:
        raise ValidationError("'factors' section is empty")

    if "dag" in doc:
        section = doc["dag"]
        out.dag = Dag(_expect(section, "nodes", "dag"), section.get("parents", {}))
    if "ugm" in doc:
        section = doc["ugm"]
        edges = [tuple(e) for e in section.get("edges", [])]
        out.ugm = Ugm(_expect(section, "nodes", "ugm"), edges)
    if "hmm" in doc:
        out.hmm = _parse_hmm(doc["hmm"])
    if "kalman" in doc:
        section = doc["kalman"]
        prior = _expect(section, "prior", "kalman")
        out.kalman = KalmanModel(
            _expect(section, "A", "kalman"),
            _expect(section, "B", "kalman"),
            _expect(section, "C", "kalman"),
            _expect(section, "D", "kalman"),
            Gaussian1(float(_expect(prior, "mean", "kalman.prior")),
                      float(_expect(prior, "var", "kalman.prior"))),
        )
    if "rbm" in doc:
        section = doc["rbm"]
        out.rbm = RbmModel(
            _expect(section, "W", "rbm"),
            _expect(section, "a", "rbm"),
            _expect(section, "b", "rbm"),
        )
    if "meanfield" in doc:
        section = doc["meanfield"]
        out.meanfield = GaussianTarget(
            _expect(section, "precision", "meanfield"),
            _expect(section, "linear", "meanfield"),
        )
    return out


def parse_model(path) -> ModelDocument:
    """Load and validate a model document from a JSON file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_model_dict(doc)


def _nesting(x) -> int:
    depth = 0
    while isinstance(x, (list, tuple)) and len(x) > 0:
        depth += 1
        x = x[0]
    return depth


def _parse_hmm(section: dict) -> DiscreteHmm:
    """Accepts shared (2-D) or per-step (3-D) transition/emission matrices;
    the fully shared form additionally needs a 'steps' count."""
    prior = np.asarray(_expect(section, "prior", "hmm"), dtype=float)
    transitions = _expect(section, "transitions", "hmm")
    emissions = _expect(section, "emissions", "hmm")
    t_depth, e_depth = _nesting(transitions), _nesting(emissions)
    if t_depth not in (2, 3) or e_depth not in (2, 3):
        raise ValidationError("hmm: transitions and emissions must be matrices or lists of matrices")
    if t_depth == 2 and e_depth == 2:
        steps = int(_expect(section, "steps", "hmm (homogeneous form)"))
        return DiscreteHmm.homogeneous(prior, transitions, emissions, steps)
    emis_list = list(emissions) if e_depth == 3 else []
    trans_list = list(transitions) if t_depth == 3 else [transitions] * (len(emis_list) - 1)
    if e_depth == 2:
        emis_list = [emissions] * (len(trans_list) + 1)
    return DiscreteHmm(prior, trans_list, emis_list)


def serialise_model(doc: ModelDocument) -> dict:
    """Canonical JSON-ready dict; parse(serialise(d)) reproduces d."""
    out: dict = {}
    if doc.variables:
        out["variables"] = [{"name": n, "card": c} for n, c in doc.variables]
    if doc.factors:
        out["factors"] = [
            {"name": name, "scope": list(f.var_names), "values": f.values.tolist()}
            for name, f in doc.factors.items()
        ]
    if doc.dag is not None:
        out["dag"] = {
            "nodes": list(doc.dag.nodes),
            "parents": {n: list(ps) for n, ps in doc.dag.parents.items() if ps},
        }
    if doc.ugm is not None:
        out["ugm"] = {
            "nodes": list(doc.ugm.nodes),
            "edges": [list(e) for e in sorted(doc.ugm.edges())],
        }
    if doc.hmm is not None:
        out["hmm"] = {
            "prior": doc.hmm.prior.tolist(),
            "transitions": [t.tolist() for t in doc.hmm.transitions],
            "emissions": [e.tolist() for e in doc.hmm.emissions],
        }
    if doc.kalman is not None:
        out["kalman"] = {
            "A": list(doc.kalman.A),
            "B": list(doc.kalman.B),
            "C": list(doc.kalman.C),
            "D": list(doc.kalman.D),
            "prior": {"mean": doc.kalman.prior.mean, "var": doc.kalman.prior.var},
        }
    if doc.rbm is not None:
        out["rbm"] = {
            "W": doc.rbm.W.tolist(),
            "a": doc.rbm.a.tolist(),
            "b": doc.rbm.b.tolist(),
        }
    if doc.meanfield is not None:
        out["meanfield"] = {
            "precision": doc.meanfield.precision.tolist(),
            "linear": doc.meanfield.linear.tolist(),
        }
    return out
