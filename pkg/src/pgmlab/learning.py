"""Parameter estimation: CPT counting (MLE and Bayesian), Bernoulli and
Gaussian estimators, score matching for log-linear models, the two-variable
Ising MLE, and factor-analysis marginal utilities.

CPT parent configurations are indexed with the first parent varying
fastest, matching the factor-table layout, so a node with parents (p1, p2)
has configuration index s = state(p1) + card(p1) * state(p2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NumericError, SingularMatrixError, ValidationError
from .graphs import Dag
from .numerics import matrix_sqrt_psd
from .sequential import Gaussian1, gaussian_product


@dataclass(frozen=True)
class BinaryDataset:
    """Rectangular 0/1 data with named columns, one row per observation."""

    columns: tuple[str, ...]
    rows: np.ndarray

    def __init__(self, columns: Sequence[str], rows):
        cols = tuple(str(c) for c in columns)
        if len(set(cols)) != len(cols):
            raise ValidationError("duplicate column names")
        arr = np.asarray(rows, dtype=int)
        if arr.ndim != 2 or arr.shape[1] != len(cols):
            raise ValidationError("rows must form a rectangular table matching the columns")
        if not np.isin(arr, (0, 1)).all():
            raise ValidationError("entries must be 0 or 1")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "rows", arr)

    @classmethod
    def from_csv(cls, path) -> "BinaryDataset":
        header, rows = _read_csv(path)
        return cls(header, rows)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.rows[:, self.columns.index(name)]
        except ValueError:
            raise ValidationError(f"no column {name!r}") from None

    def __len__(self) -> int:
        return self.rows.shape[0]


def _read_csv(path) -> tuple[list[str], list[list[int]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([int(x) for x in row])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-integer entry") from None
    return [h.strip() for h in header], rows


def load_spin_csv(path) -> np.ndarray:
    """Read a CSV of -1/+1 entries (header row ignored beyond its width)."""
    header, rows = _read_csv(path)
    arr = np.asarray(rows, dtype=int)
    if arr.size == 0 or arr.ndim != 2 or arr.shape[1] != len(header):
        raise ValidationError("spin data must be a nonempty rectangular table")
    if not np.isin(arr, (-1, 1)).all():
        raise ValidationError("spin entries must be -1 or +1")
    return arr


@dataclass(frozen=True)
class CptCell:
    """Counts and estimate for one (node, parent configuration) cell.

    ``theta`` is None when the parent configuration never occurs, making
    the maximum-likelihood estimate undefined.
    """

    theta: float | None
    ones: int
    zeros: int

    @property
    def defined(self) -> bool:
        return self.theta is not None


@dataclass(frozen=True)
class CptEstimate:
    cells: Mapping[str, tuple[CptCell, ...]]

    def table(self, node: str) -> tuple[CptCell, ...]:
        return self.cells[node]


@dataclass(frozen=True)
class BetaParams:
    """Beta(alpha, beta) parameters; the mean is the posterior predictive."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValidationError("Beta parameters must be positive")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class CptPosterior:
    cells: Mapping[str, tuple[BetaParams, ...]]

    def table(self, node: str) -> tuple[BetaParams, ...]:
        return self.cells[node]

    def predictive(self, node: str) -> tuple[float, ...]:
        return tuple(c.mean for c in self.cells[node])


def _cell_counts(dag: Dag, data: BinaryDataset) -> dict[str, list[tuple[int, int]]]:
    missing = set(dag.nodes) - set(data.columns)
    if missing:
        raise ValidationError(f"data lacks columns for nodes {sorted(missing)}")
    counts: dict[str, list[tuple[int, int]]] = {}
    for node in dag.nodes:
        parents = dag.parents_of(node)
        n_states = 2 ** len(parents)
        ones = np.zeros(n_states, dtype=int)
        zeros = np.zeros(n_states, dtype=int)
        child = data.column(node)
        if parents:
            # First parent varies fastest in the configuration index.
            weights = 2 ** np.arange(len(parents))
            config = np.zeros(len(data), dtype=int)
            for p, w in zip(parents, weights):
                config += w * data.column(p)
        else:
            config = np.zeros(len(data), dtype=int)
        np.add.at(ones, config[child == 1], 1)
        np.add.at(zeros, config[child == 0], 1)
        counts[node] = list(zip(ones.tolist(), zeros.tolist()))
    return counts


def fit_cpt_mle(dag: Dag, data: BinaryDataset) -> CptEstimate:
    """Per-cell maximum likelihood ratios n1 / (n1 + n0); cells whose parent
    configuration never occurs stay explicitly undefined."""
    counts = _cell_counts(dag, data)
    cells = {
        node: tuple(
            CptCell(n1 / (n1 + n0) if n1 + n0 > 0 else None, n1, n0)
            for n1, n0 in pairs
        )
        for node, pairs in counts.items()
    }
    return CptEstimate(cells)


def fit_cpt_bayes(dag: Dag, data: BinaryDataset, alpha0: float, beta0: float) -> CptPosterior:
    """Posterior Beta(alpha0 + n1, beta0 + n0) per cell under independent
    Beta priors shared across all cells."""
    if alpha0 <= 0 or beta0 <= 0:
        raise ValidationError("hyperparameters must be positive")
    counts = _cell_counts(dag, data)
    cells = {
        node: tuple(BetaParams(alpha0 + n1, beta0 + n0) for n1, n0 in pairs)
        for node, pairs in counts.items()
    }
    return CptPosterior(cells)


def bernoulli_mle(data: Sequence[int]) -> float:
    values = [int(x) for x in data]
    if not values:
        raise ValidationError("empty data")
    if any(v not in (0, 1) for v in values):
        raise ValidationError("entries must be 0 or 1")
    return sum(values) / len(values)


def gaussian_mle(data: Sequence[float]) -> tuple[float, float]:
    """Sample mean and variance with divisor n (the joint maximiser)."""
    arr = np.asarray(list(data), dtype=float)
    if arr.size == 0:
        raise ValidationError("empty data")
    mean = float(arr.mean())
    return mean, float(((arr - mean) ** 2).mean())


def gaussian_mean_posterior(data: Sequence[float], sigma2: float, prior: Gaussian1) -> Gaussian1:
    """Posterior of a Gaussian mean with known observation variance.

    The likelihood contributes an effective Gaussian N(xbar, sigma2/n) that
    multiplies the prior.  Empty data returns the prior unchanged.
    """
    if sigma2 <= 0:
        raise ValidationError("sigma2 must be positive")
    arr = np.asarray(list(data), dtype=float)
    if arr.size == 0:
        return prior
    likelihood = Gaussian1(float(arr.mean()), sigma2 / arr.size)
    return gaussian_product(prior, likelihood)


def _as_points(data) -> np.ndarray:
    """Shape data as (n_points, n_dims); 1-D input means n scalar points."""
    points = np.asarray(data, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2:
        raise ValidationError("data must be a vector or a matrix of points")
    return points


def score_matching_fit(
    stat_gradients: Callable[[np.ndarray], np.ndarray],
    stat_curvatures: Callable[[np.ndarray], np.ndarray],
    data: np.ndarray,
) -> np.ndarray:
    """Fit a log-linear model without its partition function.

    ``stat_gradients(x)`` and ``stat_curvatures(x)`` return K x m arrays of
    first and second coordinate-wise derivatives of the K sufficient
    statistics at one point.  The objective is the quadratic form
    theta.r + theta.M theta / 2 with r the averaged summed curvatures and
    M the averaged gradient Gram matrix; the minimiser solves M theta = -r.
    """
    points = _as_points(data)
    n = points.shape[0]
    if n == 0:
        raise ValidationError("empty data")
    r = None
    m = None
    for x in points:
        k = np.atleast_2d(np.asarray(stat_gradients(x), dtype=float))
        h = np.atleast_2d(np.asarray(stat_curvatures(x), dtype=float))
        if k.shape != h.shape:
            raise ValidationError("gradient and curvature arrays must have equal shape")
        r = h.sum(axis=1) if r is None else r + h.sum(axis=1)
        m = k @ k.T if m is None else m + k @ k.T
    r = r / n
    m = m / n
    if not np.all(np.isfinite(m)) or np.linalg.matrix_rank(m) < m.shape[0]:
        raise SingularMatrixError("design matrix M is singular")
    return np.linalg.solve(m, -r)


def score_matching_objective(
    stat_gradients: Callable[[np.ndarray], np.ndarray],
    stat_curvatures: Callable[[np.ndarray], np.ndarray],
    data: np.ndarray,
    theta: np.ndarray,
) -> float:
    """Evaluate the quadratic score-matching objective at ``theta``."""
    points = _as_points(data)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    total = 0.0
    for x in points:
        k = np.atleast_2d(np.asarray(stat_gradients(x), dtype=float))
        h = np.atleast_2d(np.asarray(stat_curvatures(x), dtype=float))
        slopes = theta @ k
        curls = theta @ h
        total += float(np.sum(curls + 0.5 * slopes**2))
    return total / points.shape[0]


def gaussian_quadratic_stats() -> tuple[Callable, Callable]:
    """Gradient/curvature evaluators for the single statistic F(x) = x^2."""
    grad = lambda x: np.array([[2.0 * float(np.atleast_1d(x)[0])]])
    curv = lambda x: np.array([[2.0]])
    return grad, curv


# -- two-variable Ising model -------------------------------------------------


def ising2_logZ(theta: float) -> float:
    """Partition function of p(x1,x2) ~ exp(theta x1 x2 + x1 + x2) on {-1,1}^2:
    Z = 2 e^{-theta} + e^{theta+2} + e^{theta-2}, evaluated in the log domain."""
    terms = np.array([-theta + math.log(2.0), theta + 2.0, theta - 2.0])
    peak = terms.max()
    return float(peak + np.log(np.exp(terms - peak).sum()))


def ising2_moment(theta: float) -> float:
    """d logZ / d theta, the model expectation of x1*x2."""
    logz = ising2_logZ(theta)
    return float(
        -2.0 * math.exp(-theta - logz)
        + math.exp(theta + 2.0 - logz)
        + math.exp(theta - 2.0 - logz)
    )


def ising2_mle(data: np.ndarray, lo: float = -20.0, hi: float = 20.0, tol: float = 1e-10) -> float:
    """Maximum likelihood coupling: solve moment(theta) = mean(x1*x2) by
    bisection.  The empirical moment must lie strictly inside (-1, 1); at
    the boundary the MLE diverges."""
    arr = np.asarray(data, dtype=int)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise ValidationError("data must be nonempty pairs")
    if not np.isin(arr, (-1, 1)).all():
        raise ValidationError("entries must be -1 or +1")
    target = float((arr[:, 0] * arr[:, 1]).mean())
    if not -1.0 < target < 1.0:
        raise NumericError(f"empirical moment {target} is on the boundary; the MLE diverges")
    f = lambda th: ising2_moment(th) - target
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise NumericError("bisection bracket does not enclose the root")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- factor analysis ----------------------------------------------------------


def fa_marginal(F: np.ndarray, C: np.ndarray, psi_diag: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the visibles: (c, F C F^T + diag(psi))."""
    F = np.asarray(F, dtype=float)
    C = np.asarray(C, dtype=float)
    psi = np.asarray(psi_diag, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    if F.ndim != 2:
        raise ValidationError("F must be a matrix")
    d, h = F.shape
    if C.shape != (h, h):
        raise ValidationError("C must be square over the latent dimension")
    if psi.size != d or c.size != d:
        raise ValidationError("psi and c must match the visible dimension")
    if np.any(psi < 0):
        raise ValidationError("psi must be non-negative")
    _check_psd(C)
    return c, F @ C @ F.T + np.diag(psi)


def fa_standardise(F: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Absorb a latent covariance into the loadings: F C^{1/2} reproduces the
    same visible covariance with identity latents."""
    F = np.asarray(F, dtype=float)
    C = np.asarray(C, dtype=float)
    if F.ndim != 2 or C.shape != (F.shape[1], F.shape[1]):
        raise ValidationError("shape mismatch between F and C")
    _check_psd(C)
    return F @ matrix_sqrt_psd(C)


def _check_psd(C: np.ndarray, tol: float = 1e-9) -> None:
    if not np.allclose(C, C.T, atol=1e-9, rtol=0.0):
        raise ValidationError("matrix must be symmetric")
    eigvals = np.linalg.eigvalsh(C)
    if eigvals.min() < -tol:
        raise ValidationError("matrix must be positive semi-definite")
