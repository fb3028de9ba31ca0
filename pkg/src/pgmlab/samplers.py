"""Random number contract and Monte Carlo machinery: inverse-transform and
rejection sampling, importance sampling, random-walk Metropolis-Hastings,
RBM block Gibbs, and chain diagnostics.

All target densities are consumed in the log domain.  Every sampler takes
a :class:`SeededRng`; identical seeds give bit-identical output on the same
build (the generator is NumPy's PCG64).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ValidationError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class SeededRng:
    """Deterministic random stream: uniform(0,1) and standard-normal draws.

    Thin wrapper over ``numpy.random.Generator`` with PCG64 so the seed can
    be recorded alongside results.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size=None):
        return self._gen.uniform(0.0, 1.0, size=size)

    def normal(self, size=None):
        return self._gen.standard_normal(size=size)


# -- inverse transform sampling ------------------------------------------------


def sample_exponential(rng: SeededRng, lam: float, size=None):
    """Exponential(lam) via x = -log(1 - u) / lam."""
    if lam <= 0:
        raise ValidationError("lam must be positive")
    return -np.log1p(-rng.uniform(size=size)) / lam


def sample_laplace_unit(rng: SeededRng, size=None):
    """Zero-mean unit-variance Laplace draw by inverting its cdf."""
    u = rng.uniform(size=size)
    return laplace_unit_ppf(u)


def laplace_unit_ppf(u):
    """Inverse cdf of the unit-variance Laplace:
    -sign(u - 1/2) * log(1 - 2|u - 1/2|) / sqrt(2)."""
    u = np.asarray(u, dtype=float)
    centred = u - 0.5
    out = -np.sign(centred) * np.log1p(-2.0 * np.abs(centred)) / math.sqrt(2.0)
    return out if out.shape else float(out)


def standard_normal_logpdf(x):
    x = np.asarray(x, dtype=float)
    out = -0.5 * x * x - LOG_SQRT_2PI
    return out if out.shape else float(out)


def laplace_logpdf(x, b: float):
    """log density of the zero-mean Laplace with scale b (variance 2 b^2)."""
    x = np.asarray(x, dtype=float)
    out = -np.abs(x) / b - math.log(2.0 * b)
    return out if out.shape else float(out)


# -- rejection sampling ---------------------------------------------------------


def rejection_sample(
    rng: SeededRng,
    log_p_star: Callable[[float], float],
    propose: Callable[[SeededRng], float],
    log_q: Callable[[float], float],
    m: float,
    n: int,
) -> tuple[np.ndarray, float]:
    """Draw until ``n`` samples are accepted; accept x with probability
    p*(x) / (m q(x)).

    The caller asserts m >= sup p*/q; a proposal where the acceptance
    probability exceeds one beyond 1e-9 triggers a bound-violation error.
    Returns the samples and the empirical acceptance rate.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if m <= 0:
        raise ValidationError("m must be positive")
    log_m = math.log(m)
    accepted: list[float] = []
    proposals = 0
    while len(accepted) < n:
        x = propose(rng)
        proposals += 1
        log_acc = log_p_star(x) - log_q(x) - log_m
        if math.isnan(log_acc) or log_acc == math.inf:
            raise NumericError(f"non-finite acceptance probability at x={x}")
        if log_acc > 1e-9:
            raise NumericError(f"envelope bound violated at x={x}: acceptance {math.exp(log_acc)}")
        u = float(rng.uniform())
        if u > 0 and math.log(u) < log_acc:
            accepted.append(x)
    return np.asarray(accepted), n / proposals


def laplace_normal_bound(b: float) -> float:
    """sup over x of (standard normal pdf) / (Laplace(b) pdf):
    2b exp(1/(2 b^2)) / sqrt(2 pi)."""
    if b <= 0:
        raise ValidationError("b must be positive")
    return 2.0 * b / math.sqrt(2.0 * math.pi) * math.exp(1.0 / (2.0 * b * b))


def rejection_normal_via_laplace(rng: SeededRng, n: int, b: float = 1.0) -> tuple[np.ndarray, float]:
    """Standard-normal sampler with a Laplace(b) proposal; b = 1 maximises
    the acceptance probability at sqrt(pi / (2 e)) ~ 0.76."""
    scale = math.sqrt(2.0) * b  # unit-variance draw scaled to variance 2 b^2
    propose = lambda r: float(sample_laplace_unit(r)) * scale
    return rejection_sample(
        rng,
        standard_normal_logpdf,
        propose,
        lambda x: laplace_logpdf(x, b),
        laplace_normal_bound(b),
        n,
    )


# -- importance sampling ---------------------------------------------------------


def importance_expectation(
    rng: SeededRng,
    g: Callable[[float], float],
    log_p: Callable[[float], float],
    propose: Callable[[SeededRng], float],
    log_q: Callable[[float], float],
    n: int,
) -> float:
    """Plain importance-sampling estimate of E_p[g]:
    mean of g(x) exp(log p(x) - log q(x)) under x ~ q."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    total = 0.0
    for _ in range(n):
        x = propose(rng)
        log_w = log_p(x) - log_q(x)
        if not (math.isfinite(log_w) or log_w == -math.inf):
            raise NumericError(f"non-finite importance weight at draw x={x}")
        total += g(x) * math.exp(log_w)
    return total / n


def gaussian_tail_weights(rng: SeededRng, n: int, threshold: float = 5.0) -> np.ndarray:
    """Weights for Pr(x > threshold) under a standard normal, using the
    exponential proposal shifted to the threshold.

    Evaluated in closed form, w(x) = exp(-x^2/2 + x - threshold) / sqrt(2 pi),
    which avoids cancellation between the two log densities.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    x = threshold + sample_exponential(rng, 1.0, size=n)
    return np.exp(-0.5 * x * x + x - threshold) / math.sqrt(2.0 * math.pi)


def gaussian_tail_probability(rng: SeededRng, n: int, threshold: float = 5.0) -> float:
    """Importance-sampling estimate of Pr(x > threshold), x ~ N(0,1)."""
    return float(gaussian_tail_weights(rng, n, threshold).mean())


def self_normalised_importance(
    rng: SeededRng,
    h: Callable[[Sequence[float]], float],
    base_sampler: Callable[[SeededRng], Sequence[float]],
    weight_factors: Sequence[Callable[[float], float]],
    n: int,
) -> tuple[float, float]:
    """Self-normalised estimate of E[h] under the reweighted path law.

    Each draw x from the base sampler gets weight w = prod_i g_i(x_i); the
    estimate is sum(W h) with W the normalised weights, and the returned
    z_hat = mean(w) estimates the normalising constant E_base[prod g_i].
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    weights = np.empty(n)
    values = np.empty(n)
    for k in range(n):
        x = base_sampler(rng)
        w = 1.0
        for xi, gi in zip(x, weight_factors):
            w *= gi(xi)
        weights[k] = w
        values[k] = h(x)
    total = weights.sum()
    if total <= 0.0:
        raise NumericError("all importance weights are zero")
    return float((weights / total) @ values), float(weights.mean())


# -- Metropolis-Hastings -------------------------------------------------------


@dataclass(frozen=True)
class Trace:
    """Post-warmup MCMC output plus bookkeeping.

    ``samples`` has one row per retained sample; ``accepted`` counts accepted
    proposals over all ``proposals`` iterations (warm-up included).
    """

    samples: np.ndarray
    warmup: int
    accepted: int
    proposals: int
    seed: int

    def __post_init__(self):
        if self.accepted > self.proposals:
            raise ValidationError("accepted cannot exceed proposals")

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else 0.0


def mh(
    rng: SeededRng,
    log_p_star: Callable[[np.ndarray], float],
    init: Sequence[float],
    num_samples: int,
    vari: float = 1.0,
    warmup: int = 0,
) -> Trace:
    """Random-walk Metropolis-Hastings with an isotropic Gaussian proposal.

    The proposal adds N(0, vari) noise per dimension; the symmetric kernel
    cancels, so a move is accepted with probability
    exp(log p*(proposal) - log p*(current)).  Rejected steps copy the
    current state into the trace.  The first ``warmup`` states are
    discarded.
    """
    if num_samples < 1:
        raise ValidationError("num_samples must be >= 1")
    if vari <= 0:
        raise ValidationError("vari must be positive")
    if warmup < 0:
        raise ValidationError("warmup must be >= 0")
    current = np.asarray(init, dtype=float).reshape(-1)
    current_log = float(log_p_star(current))
    if not math.isfinite(current_log):
        raise NumericError("log p* is not finite at the initial state")
    step = math.sqrt(vari)
    dim = current.size
    kept = np.empty((num_samples, dim))
    accepted = 0
    total = num_samples + warmup
    for i in range(total):
        proposal = current + step * rng.normal(size=dim)
        proposal_log = float(log_p_star(proposal))
        log_ratio = proposal_log - current_log
        u = float(rng.uniform())
        if log_ratio >= 0 or (u > 0 and math.log(u) < log_ratio):
            current = proposal
            current_log = proposal_log
            accepted += 1
        if i >= warmup:
            kept[i - warmup] = current
    return Trace(kept, warmup, accepted, total, rng.seed)


def poisson_regression_log_pstar(
    data: Sequence[tuple[float, int]],
) -> Callable[[np.ndarray], float]:
    """Unnormalised log posterior for Poisson regression with rate
    exp(alpha x + beta) and N(0, 100) priors on both coefficients."""
    xs = np.array([float(x) for x, _ in data])
    ys = np.array([int(y) for _, y in data])
    if np.any(ys < 0):
        raise ValidationError("counts must be non-negative")
    log_fact = np.array([math.lgamma(y + 1.0) for y in ys])

    def log_pstar(theta: np.ndarray) -> float:
        alpha, beta = float(theta[0]), float(theta[1])
        prior = -0.5 * (alpha**2 + beta**2) / 100.0 - 2.0 * (LOG_SQRT_2PI + 0.5 * math.log(100.0))
        lin = alpha * xs + beta
        loglik = float(np.sum(ys * lin - np.exp(lin) - log_fact))
        return prior + loglik

    return log_pstar


#: The five-point dataset used for the Poisson-regression demonstration.
POISSON_DEMO_DATA = (
    (-0.50519053, 1),
    (-0.17185719, 0),
    (0.16147614, 2),
    (0.49480947, 1),
    (0.81509851, 2),
)


# -- restricted Boltzmann machine ------------------------------------------------


@dataclass(frozen=True)
class RbmModel:
    """Binary RBM with weights W (visibles x hiddens) and biases a, b."""

    W: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __init__(self, W, a, b):
        W = np.asarray(W, dtype=float)
        a = np.asarray(a, dtype=float).reshape(-1)
        b = np.asarray(b, dtype=float).reshape(-1)
        if W.ndim != 2 or W.shape != (a.size, b.size):
            raise ValidationError("W must be (len(a), len(b))")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def rbm_conditionals(model: RbmModel) -> tuple[Callable, Callable]:
    """The factorised conditionals: p(h_j=1 | v) = sigmoid(v W[:,j] + b_j)
    and p(v_i=1 | h) = sigmoid(W[i,:] h + a_i), each returned as a vector."""

    def hidden_given_visible(v) -> np.ndarray:
        v = _check_binary(v, model.n_visible, "v")
        return _sigmoid(v @ model.W + model.b)

    def visible_given_hidden(h) -> np.ndarray:
        h = _check_binary(h, model.n_hidden, "h")
        return _sigmoid(model.W @ h + model.a)

    return hidden_given_visible, visible_given_hidden


def _check_binary(x, size: int, name: str) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (size,):
        raise ValidationError(f"{name} must have length {size}")
    if not np.isin(x, (0, 1)).all():
        raise ValidationError(f"{name} must be a 0/1 vector")
    return x.astype(float)


def gibbs_rbm(rng: SeededRng, model: RbmModel, sweeps: int, v0=None) -> np.ndarray:
    """Block Gibbs chain: each sweep resamples all hiddens given the
    visibles, then all visibles given the hiddens.

    Returns the visible configuration after every sweep, shape
    (sweeps, n_visible).
    """
    if sweeps < 1:
        raise ValidationError("sweeps must be >= 1")
    h_given_v, v_given_h = rbm_conditionals(model)
    v = np.zeros(model.n_visible, dtype=int) if v0 is None else np.asarray(v0, dtype=int)
    _check_binary(v, model.n_visible, "v0")
    out = np.empty((sweeps, model.n_visible), dtype=int)
    for k in range(sweeps):
        h = (rng.uniform(size=model.n_hidden) < h_given_v(v)).astype(int)
        v = (rng.uniform(size=model.n_visible) < v_given_h(h)).astype(int)
        out[k] = v
    return out


def rbm_visible_unnorm_logpmf(model: RbmModel, v) -> float:
    """log of the unnormalised marginal of the visibles:
    a.v + sum_j softplus(v W[:,j] + b_j), the hiddens summed out in closed
    form."""
    v = _check_binary(v, model.n_visible, "v")
    return float(model.a @ v + np.logaddexp(0.0, v @ model.W + model.b).sum())


# -- diagnostics -----------------------------------------------------------------


def ess(samples: Sequence[float]) -> float:
    """Effective sample size S / (1 + 2 sum_k rho(k)).

    Autocorrelations are estimated from the series itself and the sum is
    truncated at the first negative estimate, since the infinite sum is not
    computable from a finite chain.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    s = x.size
    if s < 2:
        raise ValidationError("need at least two samples")
    centred = x - x.mean()
    c0 = float(centred @ centred) / s
    if c0 == 0.0:
        raise ValidationError("series is constant")
    rho_sum = 0.0
    for k in range(1, s):
        rho = float(centred[:-k] @ centred[k:]) / s / c0
        if rho < 0:
            break
        rho_sum += rho
    return s / (1.0 + 2.0 * rho_sum)


def export_trace(trace: Trace, csv_path, json_path, param_names: Sequence[str]) -> None:
    """Write the trace as a CSV of samples plus a JSON sidecar with the
    seed, warm-up length, acceptance rate, and per-dimension ESS."""
    names = [str(n) for n in param_names]
    if len(names) != trace.samples.shape[1]:
        raise ValidationError("param_names must match the sample dimension")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        writer.writerows(trace.samples.tolist())
    sidecar = {
        "seed": trace.seed,
        "warmup": trace.warmup,
        "acceptance_rate": trace.acceptance_rate,
        "ess": {name: ess(trace.samples[:, j]) for j, name in enumerate(names)},
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
