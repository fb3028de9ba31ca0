"""Discrete HMM inference, scalar Gaussian algebra, and the 1-D Kalman filter.

HMM steps are 1-based in the docs below; internally everything is 0-based.
Transition and emission matrices are row-stochastic: ``transitions[t][i, j]``
is p(h_{t+2}=j | h_{t+1}=i) and ``emissions[t][i, k]`` is p(v_{t+1}=k |
h_{t+1}=i).  All matrices may vary per step; use :meth:`DiscreteHmm.homogeneous`
for the common time-invariant case.

Filtered quantities are stored normalised with the per-step normalisers
folded into a running log term, so long chains cannot underflow while the
unnormalised values remain recoverable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ImpossibleEvidenceError, NumericError, ValidationError

_ROW_TOL = 1e-9


def _check_row_stochastic(m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValidationError(f"{what} must be a matrix")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValidationError(f"{what} must have finite non-negative entries")
    if not np.allclose(m.sum(axis=1), 1.0, atol=_ROW_TOL, rtol=0.0):
        raise ValidationError(f"rows of {what} must sum to 1")
    return m


@dataclass(frozen=True)
class DiscreteHmm:
    """Hidden Markov model with per-step transition and emission matrices."""

    prior: np.ndarray
    transitions: tuple[np.ndarray, ...]
    emissions: tuple[np.ndarray, ...]

    def __init__(self, prior, transitions: Sequence, emissions: Sequence):
        prior = np.asarray(prior, dtype=float)
        if prior.ndim != 1 or np.any(prior < 0):
            raise ValidationError("prior must be a non-negative vector")
        if abs(prior.sum() - 1.0) > _ROW_TOL:
            raise ValidationError("prior must sum to 1")
        k = prior.size
        trans = tuple(_check_row_stochastic(t, "transition matrix") for t in transitions)
        emis = tuple(_check_row_stochastic(e, "emission matrix") for e in emissions)
        if len(emis) != len(trans) + 1:
            raise ValidationError("need one emission matrix per step and one transition per gap")
        for t in trans:
            if t.shape != (k, k):
                raise ValidationError("transition matrices must be square over the state count")
        for e in emis:
            if e.shape[0] != k:
                raise ValidationError("emission rows must match the state count")
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "emissions", emis)

    @classmethod
    def homogeneous(cls, prior, transition, emission, n_steps: int) -> "DiscreteHmm":
        if n_steps < 1:
            raise ValidationError("n_steps must be >= 1")
        return cls(prior, [transition] * (n_steps - 1), [emission] * n_steps)

    @property
    def n_steps(self) -> int:
        return len(self.emissions)

    @property
    def n_states(self) -> int:
        return self.prior.size


def _check_observations(hmm: DiscreteHmm, observations: Sequence[int]) -> list[int]:
    obs = [int(v) for v in observations]
    if not 1 <= len(obs) <= hmm.n_steps:
        raise ValidationError(f"need between 1 and {hmm.n_steps} observations")
    for t, v in enumerate(obs):
        if not 0 <= v < hmm.emissions[t].shape[1]:
            raise ValidationError(f"observation {v} at step {t + 1} outside the emission alphabet")
    return obs


def alpha_filter(hmm: DiscreteHmm, observations: Sequence[int]) -> tuple[list[np.ndarray], float]:
    """Filtered marginals p(h_s | v_{1:s}) for each observed step, plus the
    data log-likelihood log p(v_{1:t}).

    Each step extends the previous filtered distribution through the
    transition, multiplies in the evidence, and renormalises; the product of
    the per-step normalisers is the likelihood.
    """
    obs = _check_observations(hmm, observations)
    filtered: list[np.ndarray] = []
    log_lik = 0.0
    current = hmm.prior
    for t, v in enumerate(obs):
        if t > 0:
            current = hmm.transitions[t - 1].T @ current
        weighted = hmm.emissions[t][:, v] * current
        norm = float(weighted.sum())
        if norm <= 0.0:
            raise ImpossibleEvidenceError(f"evidence up to step {t + 1} has probability zero")
        current = weighted / norm
        filtered.append(current)
        log_lik += math.log(norm)
    return filtered, log_lik


def hidden_prediction(hmm: DiscreteHmm, observations: Sequence[int], t: int) -> tuple[np.ndarray, float]:
    """p(h_t | v_{1:u}) for t >= u, plus the log of the unnormalised mass.

    The unnormalised forward vector at step t is ``probs * exp(log_norm)``;
    its total mass equals p(v_{1:u}) for any t > u because the transition
    rows sum to one.
    """
    obs = _check_observations(hmm, observations)
    u = len(obs)
    if not u <= t <= hmm.n_steps:
        raise ValidationError(f"prediction step t={t} must lie in [{u}, {hmm.n_steps}]")
    filtered, log_lik = alpha_filter(hmm, obs)
    current = filtered[-1]
    for s in range(u + 1, t + 1):
        current = hmm.transitions[s - 2].T @ current
    return current, log_lik


def predict_hidden(hmm: DiscreteHmm, observations: Sequence[int], t: int) -> np.ndarray:
    """Predictive distribution p(h_t | v_{1:u}) for a future step t > u."""
    probs, _ = hidden_prediction(hmm, observations, t)
    return probs


def predict_visible(hmm: DiscreteHmm, observations: Sequence[int], t: int) -> np.ndarray:
    """Predictive distribution p(v_t | v_{1:u}) = sum_h p(v_t|h_t) p(h_t|v_{1:u})."""
    hidden = predict_hidden(hmm, observations, t)
    return hmm.emissions[t - 1].T @ hidden


def smooth(hmm: DiscreteHmm, observations: Sequence[int]) -> list[np.ndarray]:
    """Smoothed marginals p(h_t | v_{1:n}) for the full sequence via the
    forward-backward product; the backward pass starts from all ones."""
    obs = _check_observations(hmm, observations)
    n = len(obs)
    if n != hmm.n_steps:
        raise ValidationError("smoothing needs the full observation sequence")
    filtered, _ = alpha_filter(hmm, obs)
    k = hmm.n_states
    beta = np.ones(k)
    out: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for t in range(n - 1, -1, -1):
        joint = filtered[t] * beta
        total = joint.sum()
        if total <= 0.0:
            raise ImpossibleEvidenceError("evidence has probability zero")
        out[t] = joint / total
        if t > 0:
            beta = hmm.transitions[t - 1] @ (hmm.emissions[t][:, obs[t]] * beta)
            peak = beta.max()
            if peak <= 0.0:
                raise ImpossibleEvidenceError("evidence has probability zero")
            beta = beta / peak
    return out


def smooth_pairwise(hmm: DiscreteHmm, observations: Sequence[int], t: int) -> np.ndarray:
    """Joint smoothed matrix p(h_{t-1}, h_t | v_{1:n}), rows indexing h_{t-1}.

    Proportional to the forward vector at t-1, the backward vector at t, and
    the step-t transition and emission terms.
    """
    obs = _check_observations(hmm, observations)
    n = len(obs)
    if n != hmm.n_steps:
        raise ValidationError("pairwise smoothing needs the full observation sequence")
    if not 2 <= t <= n:
        raise ValidationError(f"pair step t={t} must lie in [2, {n}]")
    filtered, _ = alpha_filter(hmm, obs)
    k = hmm.n_states
    beta = np.ones(k)
    for s in range(n, t, -1):
        beta = hmm.transitions[s - 2] @ (hmm.emissions[s - 1][:, obs[s - 1]] * beta)
        beta = beta / beta.max()
    joint = (
        filtered[t - 2][:, None]
        * hmm.transitions[t - 2]
        * (hmm.emissions[t - 1][:, obs[t - 1]] * beta)[None, :]
    )
    total = joint.sum()
    if total <= 0.0:
        raise ImpossibleEvidenceError("evidence has probability zero")
    return joint / total


def viterbi(hmm: DiscreteHmm, observations: Sequence[int]) -> tuple[list[int], float]:
    """Most probable hidden path and its log joint score log p(h, v).

    Standard log-domain recursion with backtracking tables; ties break to
    the lowest state index.
    """
    obs = _check_observations(hmm, observations)
    n = len(obs)
    with np.errstate(divide="ignore"):
        scores = np.log(hmm.prior) + np.log(hmm.emissions[0][:, obs[0]])
        back: list[np.ndarray] = []
        for t in range(1, n):
            trans = np.log(hmm.transitions[t - 1])
            cand = scores[:, None] + trans  # rows: previous state
            back.append(cand.argmax(axis=0))
            scores = cand.max(axis=0) + np.log(hmm.emissions[t][:, obs[t]])
    if not np.any(np.isfinite(scores)):
        raise ImpossibleEvidenceError("evidence has probability zero")
    path = [int(scores.argmax())]
    for t in range(n - 2, -1, -1):
        path.append(int(back[t][path[-1]]))
    path.reverse()
    return path, float(scores.max())


def ffbs_backward_kernel(hmm: DiscreteHmm, observations: Sequence[int], t: int) -> np.ndarray:
    """The backward sampling kernel p(h_{t-1} | h_t, v_{1:n}).

    Rows index h_t; row h sums to one exactly because the forward recursion
    defines the normaliser.
    """
    obs = _check_observations(hmm, observations)
    if not 2 <= t <= len(obs):
        raise ValidationError(f"kernel step t={t} must lie in [2, {len(obs)}]")
    filtered, _ = alpha_filter(hmm, obs)
    prev = filtered[t - 2]
    emis = hmm.emissions[t - 1][:, obs[t - 1]]
    # Unnormalised filtered vector at t, with the same scaling as prev.
    forward_t = emis * (hmm.transitions[t - 2].T @ prev)
    kernel = np.zeros((hmm.n_states, hmm.n_states))
    for h in range(hmm.n_states):
        if forward_t[h] > 0.0:
            kernel[h] = prev * hmm.transitions[t - 2][:, h] * emis[h] / forward_t[h]
    return kernel


def ffbs(hmm: DiscreteHmm, observations: Sequence[int], rng) -> list[int]:
    """One hidden trajectory drawn from p(h_{1:n} | v_{1:n})."""
    return [int(s) for s in ffbs_paths(hmm, observations, rng, 1)[0]]


def ffbs_paths(hmm: DiscreteHmm, observations: Sequence[int], rng, n_paths: int) -> np.ndarray:
    """Draw ``n_paths`` posterior trajectories sharing one forward pass.

    Returns an integer array of shape (n_paths, n_steps).
    """
    obs = _check_observations(hmm, observations)
    n = len(obs)
    if n != hmm.n_steps:
        raise ValidationError("sampling needs the full observation sequence")
    filtered, _ = alpha_filter(hmm, obs)
    kernels = [ffbs_backward_kernel(hmm, obs, t) for t in range(2, n + 1)]
    paths = np.empty((n_paths, n), dtype=int)
    paths[:, n - 1] = _categorical(rng, filtered[-1], n_paths)
    for t in range(n - 1, 0, -1):
        kernel = kernels[t - 1]
        u = rng.uniform(size=n_paths)
        cdf = kernel.cumsum(axis=1)
        drawn = (u[:, None] > cdf[paths[:, t]]).sum(axis=1)
        paths[:, t - 1] = np.minimum(drawn, hmm.n_states - 1)
    return paths


def _categorical(rng, probs: np.ndarray, size: int) -> np.ndarray:
    cdf = np.cumsum(probs)
    u = rng.uniform(size=size)
    drawn = (u[:, None] > cdf[None, :]).sum(axis=1)
    return np.minimum(drawn, probs.size - 1)


# -- scalar Gaussian algebra and the Kalman filter ---------------------------


@dataclass(frozen=True)
class Gaussian1:
    """Scalar Gaussian given by mean and (strictly positive) variance."""

    mean: float
    var: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.var)):
            raise ValidationError("mean and variance must be finite")
        if self.var <= 0.0:
            raise ValidationError("variance must be positive")


def gaussian_product(a: Gaussian1, b: Gaussian1) -> Gaussian1:
    """Renormalised product of two Gaussian densities in the same variable.

    Written in the precision-weighted form, which is exactly symmetric in
    the two arguments.
    """
    total = a.var + b.var
    var = a.var * b.var / total
    mean = (a.mean * b.var + b.mean * a.var) / total
    return Gaussian1(mean, var)


def gaussian_linear_marginal(prior: Gaussian1, a: float, b: float) -> Gaussian1:
    """Distribution of a*x + b*noise for x ~ prior and unit Gaussian noise."""
    if b < 0:
        raise ValidationError("noise scale b must be >= 0")
    return Gaussian1(a * prior.mean, a * a * prior.var + b * b)


@dataclass(frozen=True)
class KalmanModel:
    """Scalar linear-Gaussian state-space model with per-step coefficients.

    Step s applies the transition h_s = A_s h_{s-1} + B_s xi_s to the
    previous state (``prior`` plays the role of h_0) and then conditions on
    the observation v_s = C_s h_s + D_s eta_s.  Setting A_1 = 1, B_1 = 0
    makes the prior the distribution of h_1 itself.
    """

    A: tuple[float, ...]
    B: tuple[float, ...]
    C: tuple[float, ...]
    D: tuple[float, ...]
    prior: Gaussian1

    def __init__(self, A, B, C, D, prior: Gaussian1):
        A, B, C, D = (tuple(float(x) for x in seq) for seq in (A, B, C, D))
        n = len(A)
        if not (len(B) == len(C) == len(D) == n) or n == 0:
            raise ValidationError("coefficient lists must be nonempty and of equal length")
        for s, (b, c, d) in enumerate(zip(B, C, D), start=1):
            if b < 0 or d < 0:
                raise ValidationError(f"B and D must be non-negative (step {s})")
            if d == 0 and c == 0:
                raise ValidationError(f"step {s} has both D=0 and C=0")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "prior", prior)

    @property
    def n_steps(self) -> int:
        return len(self.A)


@dataclass(frozen=True)
class KalmanStep:
    mean: float
    var: float
    gain: float


def kalman_filter(model: KalmanModel, observations: Sequence[float]) -> list[KalmanStep]:
    """Filtered mean/variance and gain per step.

    Per step: propagate the previous posterior to the predictive
    N(A*mu, P) with P = A^2 sigma^2 + B^2, then correct with gain
    K = P*C / (C^2 P + D^2):  mu' = A*mu + K (v - C*A*mu) and
    sigma'^2 = (1 - K*C) P.  The variance is evaluated through the
    equivalent ratio P*D^2 / (C^2 P + D^2), which stays positive when
    K*C rounds to one in the near-noiseless-observation limit.
    """
    obs = [float(v) for v in observations]
    if len(obs) != model.n_steps:
        raise ValidationError(f"expected {model.n_steps} observations, got {len(obs)}")
    state = model.prior
    steps: list[KalmanStep] = []
    for s, v in enumerate(obs):
        a, b, c, d = model.A[s], model.B[s], model.C[s], model.D[s]
        pred = gaussian_linear_marginal(state, a, b)
        p = pred.var
        gain = p * c / (c * c * p + d * d)
        mean = pred.mean + gain * (v - c * pred.mean)
        var = p * d * d / (c * c * p + d * d)
        if var <= 0.0 or not math.isfinite(var):
            raise NumericError(f"non-positive filtered variance at step {s + 1}")
        state = Gaussian1(mean, var)
        steps.append(KalmanStep(mean, var, gain))
    return steps
