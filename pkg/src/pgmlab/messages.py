"""Exact sum-product and max-sum message passing on factor trees.

Sum-product messages are kept in the linear domain but renormalised to a
max entry of one after every step, with the removed scale accumulated in a
separate log term.  That keeps long chains from underflowing while the
worked linear numbers stay recoverable through :attr:`Message.linear`.

Messages toward leaf factor nodes are never computed; they are not needed
for marginals or factor joints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import NumericError, ValidationError
from .factors import DiscreteFactor, condition, product
from .graphs import Dag

Edge = tuple[str, str]  # (from node id, to node id)


@dataclass(frozen=True)
class FactorGraph:
    """Bipartite graph of named variables and named factors.

    Node ids live in one namespace: a factor may not share a name with a
    variable.  Edges are implied by factor scopes.
    """

    variables: tuple[tuple[str, int], ...]
    factors: Mapping[str, DiscreteFactor]

    def __init__(self, variables: Sequence[tuple[str, int]], factors: Mapping[str, DiscreteFactor]):
        vars_tuple = tuple((str(n), int(c)) for n, c in variables)
        names = [n for n, _ in vars_tuple]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate variable names")
        cards = dict(vars_tuple)
        fdict: dict[str, DiscreteFactor] = {}
        for fname, f in factors.items():
            fname = str(fname)
            if fname in cards or fname in fdict:
                raise ValidationError(f"duplicate node id {fname!r}")
            for vname, card in f.scope:
                if vname not in cards:
                    raise ValidationError(f"factor {fname!r} mentions undeclared variable {vname!r}")
                if cards[vname] != card:
                    raise ValidationError(f"cardinality mismatch for {vname!r} in factor {fname!r}")
            fdict[fname] = f
        object.__setattr__(self, "variables", vars_tuple)
        object.__setattr__(self, "factors", fdict)

    @property
    def var_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.variables)

    def card(self, var: str) -> int:
        for n, c in self.variables:
            if n == var:
                return c
        raise ValidationError(f"unknown variable {var!r}")

    def factor_neighbors(self, var: str) -> tuple[str, ...]:
        return tuple(f for f, fac in self.factors.items() if var in fac.var_names)

    def variable_neighbors(self, fname: str) -> tuple[str, ...]:
        if fname not in self.factors:
            raise ValidationError(f"unknown factor {fname!r}")
        return self.factors[fname].var_names


@dataclass(frozen=True)
class Message:
    """One directed message along a factor-graph edge.

    ``payload`` is a vector over the edge variable's states.  For the
    ``"linear"`` domain the true message is ``payload * exp(log_scale)``;
    for ``"log"`` the payload holds log values and ``log_scale`` is unused.
    """

    from_node: str
    to_node: str
    payload: np.ndarray
    domain: str = "linear"
    log_scale: float = 0.0

    @property
    def linear(self) -> np.ndarray:
        if self.domain != "linear":
            raise ValidationError("message is not in the linear domain")
        return self.payload * math.exp(self.log_scale)


@dataclass(frozen=True)
class Schedule:
    """Messages grouped into clock cycles; every message's dependencies sit
    in strictly earlier groups."""

    groups: tuple[tuple[Edge, ...], ...]

    def __len__(self) -> int:
        return len(self.groups)

    def all_edges(self) -> list[Edge]:
        return [e for g in self.groups for e in g]


def validate_tree(fg: FactorGraph) -> bool:
    """True iff the bipartite graph is connected and acyclic."""
    n_nodes = len(fg.variables) + len(fg.factors)
    if n_nodes == 0:
        return False
    n_edges = sum(len(f.scope) for f in fg.factors.values())
    # Connectivity sweep over the bipartite adjacency.
    var_set = set(fg.var_names)
    start = fg.var_names[0] if fg.variables else next(iter(fg.factors))
    seen = {start}
    stack = [start]
    while stack:
        node = stack.pop()
        nbrs = fg.factor_neighbors(node) if node in var_set else fg.variable_neighbors(node)
        for m in nbrs:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return len(seen) == n_nodes and n_edges == n_nodes - 1


def _require_tree(fg: FactorGraph) -> None:
    if not validate_tree(fg):
        raise ValidationError("factor graph is not a connected tree")


def _neighbors(fg: FactorGraph, node: str) -> tuple[str, ...]:
    if node in fg.factors:
        return fg.variable_neighbors(node)
    return fg.factor_neighbors(node)


def schedule(fg: FactorGraph) -> Schedule:
    """Group all messages into the minimal number of clock cycles.

    A message u->v becomes computable once every message w->u with w != v
    is available; leaf-bound messages into degree-one factor nodes are
    omitted.
    """
    _require_tree(fg)
    depth: dict[Edge, int] = {}

    def msg_depth(u: str, v: str) -> int:
        key = (u, v)
        if key not in depth:
            deps = [msg_depth(w, u) for w in _neighbors(fg, u) if w != v]
            depth[key] = 1 + max(deps, default=0)
        return depth[key]

    leaf_factors = {f for f in fg.factors if len(fg.factors[f].scope) == 1}
    edges: list[Edge] = []
    for fname, fac in fg.factors.items():
        for vname in fac.var_names:
            edges.append((fname, vname))
            if fname not in leaf_factors:
                edges.append((vname, fname))
    for e in edges:
        msg_depth(*e)
    n_groups = max(depth[e] for e in edges)
    groups = [tuple(sorted(e for e in edges if depth[e] == k + 1)) for k in range(n_groups)]
    return Schedule(tuple(groups))


def _factor_to_var(fg: FactorGraph, fname: str, var: str,
                   incoming: Mapping[Edge, Message]) -> Message:
    fac = fg.factors[fname]
    others = [v for v in fac.var_names if v != var]
    parts = [fac]
    scale = 0.0
    for w in others:
        msg = incoming[(w, fname)]
        parts.append(DiscreteFactor([(w, fg.card(w))], msg.payload))
        scale += msg.log_scale
    joint = product(parts)
    # Sum out every axis except the target variable's.
    target_axis = joint.var_names.index(var)
    out = np.moveaxis(joint.ndarray(), target_axis, 0).reshape(fg.card(var), -1).sum(axis=1)
    return _rescaled(fname, var, out, scale)


def _var_to_factor(fg: FactorGraph, var: str, fname: str,
                   incoming: Mapping[Edge, Message]) -> Message:
    payload = np.ones(fg.card(var))
    scale = 0.0
    for g in fg.factor_neighbors(var):
        if g == fname:
            continue
        msg = incoming[(g, var)]
        payload = payload * msg.payload
        scale += msg.log_scale
    return _rescaled(var, fname, payload, scale)


def _rescaled(u: str, v: str, payload: np.ndarray, scale: float) -> Message:
    peak = float(payload.max())
    if peak <= 0.0:
        raise NumericError(f"message {u}->{v} is identically zero")
    return Message(u, v, payload / peak, "linear", scale + math.log(peak))


def _pass_messages(fg: FactorGraph) -> dict[Edge, Message]:
    """Compute every scheduled message, in clock-cycle order."""
    messages: dict[Edge, Message] = {}
    for group in schedule(fg).groups:
        for u, v in group:
            if u in fg.factors:
                messages[(u, v)] = _factor_to_var(fg, u, v, messages)
            else:
                messages[(u, v)] = _var_to_factor(fg, u, v, messages)
    return messages


@dataclass(frozen=True)
class SumProductResult:
    marginals: dict[str, np.ndarray]
    log_partition: float
    messages: dict[Edge, Message] = field(repr=False)

    def message(self, from_node: str, to_node: str) -> Message:
        return self.messages[(from_node, to_node)]


def sum_product(fg: FactorGraph) -> SumProductResult:
    """All single-variable marginals plus the log partition function.

    The marginal of a variable is the normalised product of its incoming
    factor messages; the normaliser (times the accumulated scales) is the
    partition function and agrees across variables.
    """
    _require_tree(fg)
    messages = _pass_messages(fg)
    marginals: dict[str, np.ndarray] = {}
    log_partition = None
    for var, card in fg.variables:
        payload = np.ones(card)
        scale = 0.0
        for fname in fg.factor_neighbors(var):
            msg = messages[(fname, var)]
            payload = payload * msg.payload
            scale += msg.log_scale
        total = float(payload.sum())
        if total <= 0.0:
            raise NumericError(f"zero normaliser at variable {var!r}")
        marginals[var] = payload / total
        log_partition = math.log(total) + scale
    return SumProductResult(marginals, log_partition, messages)


def condition_factor_graph(fg: FactorGraph, evidence: Mapping[str, int]) -> tuple[FactorGraph, float]:
    """Reduce every factor on the evidence and drop the observed variables.

    Factors whose scope empties out become constants; they are removed and
    their summed log value is returned alongside, so the conditioned
    partition function can be related back to the original one.
    """
    for var, state in evidence.items():
        card = fg.card(var)
        if not 0 <= int(state) < card:
            raise ValidationError(f"evidence state {state} out of range for {var!r}")
    keep_vars = [(n, c) for n, c in fg.variables if n not in evidence]
    new_factors: dict[str, DiscreteFactor] = {}
    log_offset = 0.0
    for fname, fac in fg.factors.items():
        reduced = condition(fac, evidence)
        if reduced.scope:
            new_factors[fname] = reduced
        else:
            value = float(reduced.values[0])
            if value <= 0.0:
                raise NumericError(f"evidence has zero probability under factor {fname!r}")
            log_offset += math.log(value)
    return FactorGraph(keep_vars, new_factors), log_offset


def conditioned_sum_product(fg: FactorGraph, evidence: Mapping[str, int]) -> dict[str, np.ndarray]:
    """Marginals of the unobserved variables given the evidence.

    Conditioning rebuilds the factor graph with reduced tables and reruns
    sum-product from scratch; reusing messages from the unconditioned run
    would only be an optimisation, never a semantic change.
    """
    reduced, _ = condition_factor_graph(fg, evidence)
    return sum_product(reduced).marginals


def factor_joint(fg: FactorGraph, fname: str) -> DiscreteFactor:
    """Normalised joint over one factor's scope: the factor times all of its
    incoming variable messages."""
    if fname not in fg.factors:
        raise ValidationError(f"unknown factor {fname!r}")
    _require_tree(fg)
    messages = _pass_messages(fg)
    fac = fg.factors[fname]
    parts = [fac]
    for var in fac.var_names:
        key = (var, fname)
        msg = messages[key] if key in messages else _var_to_factor(fg, var, fname, messages)
        parts.append(DiscreteFactor([(var, fg.card(var))], msg.payload))
    joint = product(parts)
    total = float(joint.values.sum())
    if total <= 0.0:
        raise NumericError("zero normaliser in factor joint")
    return DiscreteFactor(joint.scope, joint.values / total)


@dataclass(frozen=True)
class MaxSumResult:
    assignment: dict[str, int]
    log_score: float


def max_sum_map(fg: FactorGraph, root: str) -> MaxSumResult:
    """A most probable assignment via log-domain max-sum with backtracking.

    ``log_score`` is the log of the unnormalised joint at the returned
    assignment (the partition function is never involved).  Ties always
    break toward the lowest state index, so the answer is deterministic and
    invariant to the choice of root.
    """
    _require_tree(fg)
    if root not in dict(fg.variables):
        raise ValidationError(f"root {root!r} is not a variable")

    log_msgs: dict[Edge, np.ndarray] = {}
    backtrack: dict[Edge, list[dict[str, int]]] = {}

    def var_to_factor(var: str, fname: str) -> np.ndarray:
        key = (var, fname)
        if key not in log_msgs:
            total = np.zeros(fg.card(var))
            for g in fg.factor_neighbors(var):
                if g != fname:
                    total = total + factor_to_var(g, var)
            log_msgs[key] = total
        return log_msgs[key]

    def factor_to_var(fname: str, var: str) -> np.ndarray:
        key = (fname, var)
        if key not in log_msgs:
            fac = fg.factors[fname]
            with np.errstate(divide="ignore"):
                nd = np.log(fac.ndarray())
            others = [v for v in fac.var_names if v != var]
            for w in others:
                incoming = var_to_factor(w, fname)
                shape = [1] * len(fac.scope)
                shape[fac.var_names.index(w)] = fg.card(w)
                nd = nd + incoming.reshape(shape)
            axis = fac.var_names.index(var)
            moved = np.moveaxis(nd, axis, 0).reshape(fg.card(var), -1)
            log_msgs[key] = moved.max(axis=1)
            flat_arg = moved.argmax(axis=1)
            # Decode flat argmax back into per-variable states; the moveaxis
            # reshape enumerates the remaining axes in C order.
            other_cards = [fg.card(w) for w in others]
            tables: list[dict[str, int]] = []
            for a in flat_arg:
                states: dict[str, int] = {}
                rem = int(a)
                for w, c in zip(reversed(others), reversed(other_cards)):
                    states[w] = rem % c
                    rem //= c
                tables.append(states)
            backtrack[key] = tables
        return log_msgs[key]

    root_belief = np.zeros(fg.card(root))
    for fname in fg.factor_neighbors(root):
        root_belief = root_belief + factor_to_var(fname, root)
    if not np.any(np.isfinite(root_belief)):
        raise NumericError("all configurations have zero probability")

    assignment: dict[str, int] = {root: int(np.argmax(root_belief))}
    stack: list[tuple[str, str | None]] = [(root, None)]
    while stack:
        var, skip_factor = stack.pop()
        for fname in fg.factor_neighbors(var):
            if fname == skip_factor:
                continue
            states = backtrack[(fname, var)][assignment[var]]
            for w, s in states.items():
                assignment[w] = int(s)
                stack.append((w, fname))
    log_score = float(root_belief[assignment[root]])
    return MaxSumResult(assignment, log_score)


def dag_to_factor_graph(dag: Dag, cpts: Mapping[str, DiscreteFactor]) -> FactorGraph:
    """Turn a DAG plus one CPT per node into a factor graph.

    Each CPT must have scope {node} union parents and sum to one over the
    node for every parent configuration (tolerance 1e-9).  Factor node ids
    are ``"p(<node>)"`` or ``"p(<node>|<parents>)"``.
    """
    missing = set(dag.nodes) - set(cpts)
    if missing:
        raise ValidationError(f"missing CPTs for {sorted(missing)}")
    cards: dict[str, int] = {}
    for node, f in cpts.items():
        expected = {node, *dag.parents_of(node)}
        if set(f.var_names) != expected:
            raise ValidationError(
                f"CPT for {node!r} has scope {f.var_names}, expected {sorted(expected)}")
        for vname, card in f.scope:
            if cards.setdefault(vname, card) != card:
                raise ValidationError(f"cardinality mismatch for {vname!r} across CPTs")
    factors: dict[str, DiscreteFactor] = {}
    for node in dag.nodes:
        f = cpts[node]
        axis = f.var_names.index(node)
        sums = f.ndarray().sum(axis=axis)
        if not np.allclose(sums, 1.0, atol=1e-9, rtol=0.0):
            raise ValidationError(f"CPT for {node!r} does not sum to one over the child")
        parents = dag.parents_of(node)
        fname = f"p({node}|{','.join(parents)})" if parents else f"p({node})"
        factors[fname] = f
    variables = [(n, cards[n]) for n in dag.nodes]
    return FactorGraph(variables, factors)
