"""Dense discrete factors and variable elimination.

A factor stores its table as a flat array in which the *first* scope
variable varies fastest, i.e. the entry for assignment (i1, i2, ..., ik)
over scope ((v1, c1), ..., (vk, ck)) sits at index
i1 + c1*i2 + c1*c2*i3 + ...  This matches the row order of printed factor
tables, so worked numbers paste directly into tests.

Values live in the linear domain here; log-domain handling belongs to the
message-passing layer.  Factors never rescale implicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NumericError, ValidationError

Scope = tuple[tuple[str, int], ...]


def _validate_scope(scope: Iterable[tuple[str, int]]) -> Scope:
    out = []
    names = set()
    for name, card in scope:
        name = str(name)
        card = int(card)
        if card < 1:
            raise ValidationError(f"cardinality of {name!r} must be >= 1")
        if name in names:
            raise ValidationError(f"duplicate variable {name!r} in scope")
        names.add(name)
        out.append((name, card))
    return tuple(out)


@dataclass(frozen=True)
class DiscreteFactor:
    """Non-negative table over an ordered scope of discrete variables."""

    scope: Scope
    values: np.ndarray

    def __init__(self, scope: Iterable[tuple[str, int]], values):
        scope = _validate_scope(scope)
        arr = np.asarray(values, dtype=float).reshape(-1)
        size = math.prod(c for _, c in scope)
        if arr.size != size:
            raise ValidationError(f"expected {size} values for scope {scope}, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("factor values must be finite")
        if np.any(arr < 0):
            raise ValidationError("factor values must be non-negative")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "values", arr)

    # -- basic accessors ---------------------------------------------------

    @property
    def var_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.scope)

    @property
    def cards(self) -> tuple[int, ...]:
        return tuple(card for _, card in self.scope)

    def card_of(self, var: str) -> int:
        for name, card in self.scope:
            if name == var:
                return card
        raise ValidationError(f"{var!r} not in scope")

    def ndarray(self) -> np.ndarray:
        """Multi-dimensional view; axis k indexes the k-th scope variable."""
        return self.values.reshape(self.cards, order="F")

    def value_at(self, assignment: Mapping[str, int]) -> float:
        idx = tuple(int(assignment[name]) for name in self.var_names)
        return float(self.ndarray()[idx])

    def __eq__(self, other):
        if not isinstance(other, DiscreteFactor):
            return NotImplemented
        return self.scope == other.scope and np.array_equal(self.values, other.values)

    @classmethod
    def from_ndarray(cls, scope: Iterable[tuple[str, int]], nd: np.ndarray) -> "DiscreteFactor":
        return cls(scope, np.asarray(nd).reshape(-1, order="F"))

    @classmethod
    def ones(cls, scope: Iterable[tuple[str, int]]) -> "DiscreteFactor":
        scope = _validate_scope(scope)
        return cls(scope, np.ones(math.prod(c for _, c in scope)))


def product(factors: Sequence[DiscreteFactor]) -> DiscreteFactor:
    """Multiply factors; the result scope is the union in first-appearance
    order and shared variables must agree on cardinality."""
    union: list[tuple[str, int]] = []
    seen: dict[str, int] = {}
    for f in factors:
        for name, card in f.scope:
            if name in seen:
                if seen[name] != card:
                    raise ValidationError(f"cardinality conflict for {name!r}")
            else:
                seen[name] = card
                union.append((name, card))
    shape = tuple(card for _, card in union)
    position = {name: i for i, (name, _) in enumerate(union)}
    result = np.ones(shape)
    for f in factors:
        axes = [position[name] for name in f.var_names]
        # Reorder the factor axes by union position, then broadcast with
        # size-1 axes for the variables it does not mention.
        perm = sorted(range(len(axes)), key=axes.__getitem__)
        nd = np.transpose(f.ndarray(), perm)
        view_shape = [1] * len(union)
        for ax, size in zip(sorted(axes), nd.shape):
            view_shape[ax] = size
        result = result * nd.reshape(view_shape)
    return DiscreteFactor.from_ndarray(union, result)


def sum_marginalise(f: DiscreteFactor, var: str) -> DiscreteFactor:
    """Sum the table over the states of ``var`` and drop it from the scope."""
    axis = f.var_names.index(var) if var in f.var_names else None
    if axis is None:
        raise ValidationError(f"{var!r} not in scope")
    rest = tuple(s for s in f.scope if s[0] != var)
    summed = f.ndarray().sum(axis=axis)
    return DiscreteFactor.from_ndarray(rest, summed)


def max_marginalise(f: DiscreteFactor, var: str) -> tuple[DiscreteFactor, np.ndarray]:
    """Maximise the table over ``var``.

    Returns the reduced factor and the argmax table: a flat int array over
    the remaining scope (same layout convention) holding the maximising
    state of ``var``, ties broken to the lowest state index.
    """
    if var not in f.var_names:
        raise ValidationError(f"{var!r} not in scope")
    axis = f.var_names.index(var)
    rest = tuple(s for s in f.scope if s[0] != var)
    nd = f.ndarray()
    reduced = nd.max(axis=axis)
    argmax = nd.argmax(axis=axis)  # first occurrence = lowest state
    return (
        DiscreteFactor.from_ndarray(rest, reduced),
        np.asarray(argmax).reshape(-1, order="F"),
    )


def condition(f: DiscreteFactor, assignment: Mapping[str, int]) -> DiscreteFactor:
    """Slice the table at the given states; assigned variables leave the
    scope.  Variables in ``assignment`` that are not in the scope are
    ignored so one assignment can be applied across a factor collection."""
    index: list[object] = []
    rest: list[tuple[str, int]] = []
    for name, card in f.scope:
        if name in assignment:
            state = int(assignment[name])
            if not 0 <= state < card:
                raise ValidationError(f"state {state} out of range for {name!r} (card {card})")
            index.append(state)
        else:
            index.append(slice(None))
            rest.append((name, card))
    sliced = f.ndarray()[tuple(index)]
    return DiscreteFactor.from_ndarray(tuple(rest), np.asarray(sliced))


def normalise(f: DiscreteFactor) -> tuple[DiscreteFactor, float]:
    """Scale the table to sum to one; also return log of the original sum."""
    total = float(f.values.sum())
    if total <= 0.0:
        raise NumericError("cannot normalise an all-zero factor")
    return DiscreteFactor(f.scope, f.values / total), math.log(total)


@dataclass(frozen=True)
class EliminationReport:
    """Size accounting for one run of variable elimination.

    ``step_sizes`` holds the entry count of the product table formed at each
    elimination step; ``peak_table_entries`` is their maximum (0 when nothing
    was eliminated).  ``intermediates`` keeps the factor produced by each
    step, after summing, for inspection.
    """

    order: tuple[str, ...]
    step_sizes: tuple[int, ...]
    intermediates: tuple[DiscreteFactor, ...]

    @property
    def peak_table_entries(self) -> int:
        return max(self.step_sizes, default=0)


def eliminate(
    factors: Sequence[DiscreteFactor],
    keep: Iterable[str],
    order: Sequence[str],
) -> tuple[DiscreteFactor, EliminationReport]:
    """Sum out ``order`` one variable at a time and return the unnormalised
    factor over ``keep``.

    At each step every factor mentioning the next variable is multiplied
    into one table which is then sum-marginalised; the report records the
    size of each such table.
    """
    keep = {str(v) for v in keep}
    order = [str(v) for v in order]
    if keep & set(order):
        raise ValidationError("keep and order must be disjoint")
    all_vars: set[str] = set()
    for f in factors:
        all_vars |= set(f.var_names)
    stray = all_vars - keep - set(order)
    if stray:
        raise ValidationError(f"variables {sorted(stray)} appear in neither keep nor order")
    if sorted(order) != sorted(all_vars - keep):
        raise ValidationError("order must be a permutation of the eliminated variables")
    missing = keep - all_vars
    if missing:
        raise ValidationError(f"keep variables {sorted(missing)} appear in no factor")

    work = list(factors)
    sizes: list[int] = []
    intermediates: list[DiscreteFactor] = []
    for var in order:
        touching = [f for f in work if var in f.var_names]
        work = [f for f in work if var not in f.var_names]
        prod = product(touching)
        sizes.append(prod.values.size)
        reduced = sum_marginalise(prod, var)
        intermediates.append(reduced)
        work.append(reduced)
    result = product(work) if work else DiscreteFactor((), [1.0])
    report = EliminationReport(tuple(order), tuple(sizes), tuple(intermediates))
    return result, report
