"""Exact simulation of the finite-population frequency chain.

One generation of N offspring works at the frequency level without ever
materializing individuals: parents are drawn uniformly with replacement, so
the types of sampled potential parents are iid categorical at the current
frequencies.  Offspring are grouped by sample size (the counts are jointly
multinomial), and within a group each offspring's type follows the exact
averaged law of the colouring rule, so the whole generation reduces to a
handful of multinomial draws.  This is a reformulation of the
individual-based definition, not an approximation.

Extreme reproductive generations replace the rule: one uniformly chosen
parent hands its type to a Binomial(N, Z) block, the rest of the offspring
pick uniform parents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OffspringLaw, ScalingSchedule, freqs_of, round_to_counts
from .measures import TruncatedSizeLaw
from .rules import ColouringRule, DEFAULT_K_MAX
from .trajectory import Trajectory


@dataclass(frozen=True)
class DiscreteModel:
    """A finite population with its reproduction mechanism."""

    N: int
    rule: ColouringRule
    offspring: OffspringLaw
    gamma: float = 0.0
    size_law: TruncatedSizeLaw | None = None
    schedule: ScalingSchedule | None = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"population size must be >= 2, got {self.N}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"event probability must lie in [0, 1], got {self.gamma}")
        if self.gamma > 0.0 and self.size_law is None:
            raise ValueError("a size law is required when extreme events can occur")

    @classmethod
    def from_schedule(cls, schedule: ScalingSchedule, rule: ColouringRule) -> "DiscreteModel":
        return cls(
            N=schedule.N,
            rule=rule,
            offspring=schedule.offspring,
            gamma=schedule.gamma,
            size_law=schedule.size_law,
            schedule=schedule,
        )

    @property
    def K(self) -> int:
        return self.rule.K


def _class_table(model: DiscreteModel) -> tuple[np.ndarray, np.ndarray]:
    """Sample-size classes and their probabilities, singleton class first."""
    ks = [1] + [k for k, _ in model.offspring.tail]
    ps = [1.0 - model.offspring.rho] + [model.offspring.rho * p for _, p in model.offspring.tail]
    return np.array(ks), np.array(ps)


def step_generation(model: DiscreteModel, x, rng: np.random.Generator) -> np.ndarray:
    """Advance the frequency vector by one generation."""
    x = freqs_of(x)
    return step_generation_batch(model, x[None, :], rng)[0]


def step_generation_batch(model: DiscreteModel, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized generation step for a batch of replicate states ``(R, K)``."""
    R, K = X.shape
    N = model.N
    counts = np.zeros((R, K), dtype=np.int64)

    extreme = rng.random(R) < model.gamma if model.gamma > 0.0 else np.zeros(R, dtype=bool)
    ordinary = ~extreme

    if ordinary.any():
        rows = np.flatnonzero(ordinary)
        Xo = X[rows]
        ks, ps = _class_table(model)
        if ks.size == 1:
            per_class = np.full((rows.size, 1), N, dtype=np.int64)
        else:
            per_class = rng.multinomial(N, np.broadcast_to(ps, (rows.size, ps.size)))
        for c, k in enumerate(ks):
            n_k = per_class[:, c]
            busy = n_k > 0
            if not busy.any():
                continue
            sub = np.flatnonzero(busy)
            if k == 1:
                law = Xo[sub]
            elif k <= DEFAULT_K_MAX and model.rule.supports_enumeration(k):
                law = model.rule.type_law_batch(k, Xo[sub])
            else:
                counts[rows[sub]] += _per_individual(model.rule, k, Xo[sub], n_k[sub], rng)
                continue
            counts[rows[sub]] += rng.multinomial(n_k[sub], law)

    if extreme.any():
        rows = np.flatnonzero(extreme)
        Xe = X[rows]
        star_type = _categorical_rows(Xe, rng)
        sizes = model.size_law.sample(rng, rows.size)
        block = rng.binomial(N, sizes)
        rest = rng.multinomial(N - block, Xe)
        rest[np.arange(rows.size), star_type] += block
        counts[rows] = rest

    return counts / float(N)


def _categorical_rows(P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(P, axis=1)
    u = rng.random(P.shape[0]) * cdf[:, -1]
    return (cdf < u[:, None]).sum(axis=1).clip(max=P.shape[1] - 1)


def _per_individual(rule: ColouringRule, k: int, X: np.ndarray, n_k: np.ndarray, rng) -> np.ndarray:
    """Fallback when enumeration over multisets of size k is too large."""
    out = np.zeros((X.shape[0], X.shape[1]), dtype=np.int64)
    for r in range(X.shape[0]):
        samples = rng.multinomial(k, X[r], size=int(n_k[r]))
        probs = rule.distribution_batch(samples)
        types = _categorical_rows(probs, rng)
        out[r] = np.bincount(types, minlength=X.shape[1])
    return out


def simulate_discrete(
    model: DiscreteModel,
    x0,
    generations: int,
    record_every: int,
    rng: np.random.Generator,
) -> Trajectory:
    """Run the chain and record every ``record_every``-th generation.

    The initial state is apportioned to the 1/N lattice by largest
    remainders.  Once a mutation-free run is monomorphic it is absorbed and
    the remaining records are filled without further sampling.
    """
    if generations < 0 or record_every < 1:
        raise ValueError("need generations >= 0 and record_every >= 1")
    x = round_to_counts(x0, model.N) / float(model.N)
    times = [0.0]
    states = [x.copy()]
    absorbed = model.rule.mutation_free and bool(np.any(x == 1.0))
    for g in range(1, generations + 1):
        if not absorbed:
            x = step_generation(model, x, rng)
            if model.rule.mutation_free and np.any(x == 1.0):
                absorbed = True
        if g % record_every == 0:
            times.append(float(g))
            states.append(x.copy())
    return Trajectory(np.array(times), np.array(states))


class DriftEstimate:
    """Monte Carlo estimate of the per-unit-selection drift at one state."""

    def __init__(self, values: np.ndarray, stderr: np.ndarray, samples: int, exact: bool):
        self.values = values
        self.stderr = stderr
        self.samples = samples
        self.exact = exact


def empirical_drift(
    model: DiscreteModel,
    x,
    replicates: int,
    rng: np.random.Generator | None = None,
    *,
    method: str = "mc",
) -> DriftEstimate:
    """Estimate the drift of the non-extreme dynamics, rescaled by ``rho``.

    Estimates ``(p(x) - x) / rho`` where ``p`` is the one-offspring type
    law.  The singleton part of the offspring law contributes ``x`` exactly
    and cancels, so only samples of two or more parents are simulated: a
    sample size is drawn from the tail, parent types from multinomial(k, x),
    and the rule's conditional type distribution (not a sampled type) is
    averaged, which is unbiased with strictly smaller variance.

    ``method="exact"`` instead enumerates every multiset (zero stderr),
    available while the tail sizes stay enumerable.
    """
    x = freqs_of(x)
    tail_ks = np.array([k for k, _ in model.offspring.tail])
    tail_ps = np.array([p for _, p in model.offspring.tail])

    if method == "exact":
        drift = -x.copy()
        for k, p in model.offspring.tail:
            drift += p * model.rule.type_law(k, x)
        return DriftEstimate(drift, np.zeros_like(x), 0, True)
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if rng is None:
        raise ValueError("the Monte Carlo path needs an rng")

    if tail_ks.size == 1:
        per_k = np.array([replicates])
    else:
        per_k = rng.multinomial(replicates, tail_ps)
    total = np.zeros_like(x)
    total_sq = np.zeros_like(x)
    for k, n_k in zip(tail_ks, per_k):
        if n_k == 0:
            continue
        samples = rng.multinomial(int(k), x, size=int(n_k))
        rows = model.rule.distribution_batch(samples)
        total += rows.sum(axis=0)
        total_sq += (rows**2).sum(axis=0)
    mean = total / replicates
    var = np.maximum(total_sq / replicates - mean**2, 0.0)
    stderr = np.sqrt(var / replicates)
    return DriftEstimate(mean - x, stderr, replicates, False)
