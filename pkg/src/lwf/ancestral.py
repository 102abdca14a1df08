"""The lineage-count chain dual to the ordered-contest frequency process.

State n counts potential ancestors of a sample.  Moves from n:

* branching: ``n -> n + j`` at rate ``n * kappa * w_j``, each lineage
  independently splitting into ``j`` extra potential parents with weight
  ``w_j`` (``j`` is the sample size minus one);
* pairwise coalescence: ``n -> n - 1`` at rate ``sigma * n (n-1) / 2``;
* multiple-merger collisions: ``n -> n - k + 1`` at rate
  ``C(n, k) * lambda_nk`` for ``2 <= k <= n``.

With these rates the chain is the exact moment dual of the limit frequency
process under ordered contests: ``E_x[X_w(t)**n] = E_n[x_w**D_t]`` for the
cumulative frequency ``x_w`` of the weakest group, which is what the
fixation formulas below rest on.  (The per-lineage factor n in the
branching rate is required by that duality; see the chain's log-drift
``kappa * beta - integral |log(1-y)| L(dy)/y**2``, whose sign gives the
recurrence dichotomy at the threshold ``kappa_star``.)

The chain is positive recurrent when ``sigma > 0`` (quadratic death beats
linear birth) or ``kappa < kappa_star``, and the frequency process then
fixes along the pgf of the stationary law; otherwise it is transient and
the highest labelled type present at time zero fixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import OffspringLaw, freqs_of
from .errors import RateExplosionError, TransienceError
from .measures import LambdaMeasure, ZeroMeasure, kappa_star as _kappa_star

STATE_GUARD = 10**7


@dataclass(frozen=True)
class AncestralModel:
    """Parameters of the lineage-count chain."""

    kappa: float
    sigma: float
    increments: tuple[tuple[int, float], ...]
    measure: LambdaMeasure
    n_cap: int = 10_000
    per_lineage_branching: bool = True

    def __init__(self, kappa, sigma, increments, measure=None, n_cap=10_000, per_lineage_branching=True):
        if kappa < 0 or sigma < 0:
            raise ValueError("kappa and sigma must be nonnegative")
        if isinstance(increments, OffspringLaw):
            items = sorted(increments.increments().items())
        elif isinstance(increments, dict):
            items = sorted((int(j), float(w)) for j, w in increments.items())
        else:
            items = sorted((int(j), float(w)) for j, w in increments)
        items = [(j, w) for j, w in items if w > 0.0]
        for j, w in items:
            if j < 1:
                raise ValueError(f"branching increments must be >= 1, got {j}")
        if items and abs(sum(w for _, w in items) - 1.0) > 1e-9:
            raise ValueError("increment weights must sum to 1")
        if not items and kappa > 0:
            raise ValueError("kappa > 0 needs a branching increment law")
        object.__setattr__(self, "kappa", float(kappa))
        object.__setattr__(self, "sigma", float(sigma))
        object.__setattr__(self, "increments", tuple(items))
        object.__setattr__(self, "measure", measure if measure is not None else ZeroMeasure())
        object.__setattr__(self, "n_cap", int(n_cap))
        object.__setattr__(self, "per_lineage_branching", bool(per_lineage_branching))
        object.__setattr__(self, "_rate_cache", {})

    @property
    def beta(self) -> float:
        """Mean branching increment (mean extra potential parents)."""
        return sum(j * w for j, w in self.increments)

    @property
    def kappa_star(self) -> float:
        if not self.increments:
            return math.inf
        return _kappa_star(self.measure, self.beta)

    def is_positive_recurrent(self) -> bool:
        """Recurrence side of the dichotomy (kappa = 0 counts as recurrent)."""
        return self.kappa == 0.0 or self.sigma > 0.0 or self.kappa < self.kappa_star

    def rates(self, n: int):
        """Cached ``(targets, rates, cumulative, total)`` out of state n."""
        cached = self._rate_cache.get(n)
        if cached is None:
            targets, rates = _build_rates(self, n)
            cum = np.cumsum(rates)
            total = float(cum[-1]) if rates.size else 0.0
            cached = (targets, rates, cum, total)
            self._rate_cache[n] = cached
        return cached


def _build_rates(model: AncestralModel, n: int):
    if n < 1:
        raise ValueError(f"state must be >= 1, got {n}")
    targets, rates = [], []
    scale = n if model.per_lineage_branching else 1
    for j, w in model.increments:
        rate = model.kappa * w * scale
        if rate > 0:
            targets.append(n + j)
            rates.append(rate)
    if n >= 2:
        if model.sigma > 0:
            targets.append(n - 1)
            rates.append(model.sigma * n * (n - 1) / 2.0)
        collision = model.measure.collision_rate_vector(n)  # k = 2..n
        for k_off, rate in enumerate(collision):
            if rate > 0.0:
                targets.append(n - (k_off + 2) + 1)
                rates.append(float(rate))
    return np.array(targets, dtype=np.int64), np.array(rates, dtype=float)


def ancestral_rates(model: AncestralModel, n: int) -> list[tuple[int, float]]:
    """All (target state, rate) moves out of state n, zero rates dropped."""
    targets, rates, _, _ = model.rates(n)
    merged: dict[int, float] = {}
    for t, r in zip(targets, rates):
        merged[int(t)] = merged.get(int(t), 0.0) + float(r)
    return sorted(merged.items())


def simulate_ancestral(
    model: AncestralModel,
    n0: int,
    horizon: float,
    rng: np.random.Generator,
    *,
    state_guard: int = STATE_GUARD,
):
    """Gillespie path up to the horizon: ``(jump times, states)`` arrays.

    The initial state is recorded at time 0.  Raises
    :class:`RateExplosionError` if the state passes ``state_guard`` (the
    transient regime grows without bound).
    """
    if n0 < 1:
        raise ValueError("initial state must be >= 1")
    times, states = [0.0], [int(n0)]
    t, n = 0.0, int(n0)
    while True:
        targets, _, cum, total = model.rates(n)
        if total <= 0.0:
            break
        t += rng.exponential(1.0 / total)
        if t >= horizon:
            break
        n = int(targets[np.searchsorted(cum, rng.random() * total)])
        if n > state_guard:
            raise RateExplosionError(f"lineage count passed {state_guard} at time {t:.4g}")
        times.append(t)
        states.append(n)
    return np.array(times), np.array(states, dtype=np.int64)


def dual_moment(
    model: AncestralModel,
    x: float,
    n0: int,
    t: float,
    replicates: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of ``E[x**D_t]`` from ``D_0 = n0`` with stderr."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    total = 0.0
    total_sq = 0.0
    for _ in range(replicates):
        n, s = int(n0), 0.0
        while True:
            targets, _, cum, rate = model.rates(n)
            if rate <= 0.0:
                break
            s += rng.exponential(1.0 / rate)
            if s >= t:
                break
            n = int(targets[np.searchsorted(cum, rng.random() * rate)])
            if n > STATE_GUARD:
                raise RateExplosionError(f"lineage count passed {STATE_GUARD}")
        val = x**n
        total += val
        total_sq += val * val
    mean = total / replicates
    var = max(total_sq / replicates - mean * mean, 0.0)
    return mean, math.sqrt(var / replicates)


def dual_moment_exact(model: AncestralModel, x: float, n0: int, t: float, n_max: int = 400) -> float:
    """Matrix-exponential evaluation of ``E[x**D_t]`` on a truncated state space.

    Truncation drops branching moves above ``n_max``; pick ``n_max`` large
    enough that the chain has negligible mass there.  Test oracle.
    """
    from scipy.linalg import expm

    Q = np.zeros((n_max, n_max))
    for n in range(1, n_max + 1):
        targets, rates, _, _ = model.rates(n)
        for tgt, rate in zip(targets, rates):
            if tgt <= n_max:
                Q[n - 1, tgt - 1] += rate
                Q[n - 1, n - 1] -= rate
    P = expm(Q * t)
    vals = x ** np.arange(1, n_max + 1)
    return float(P[n0 - 1] @ vals)


# ---------------------------------------------------------------------------
# Stationary law and fixation
# ---------------------------------------------------------------------------


@dataclass
class StationaryEstimate:
    """Occupation-time estimate of the stationary law with batch-means errors."""

    states: np.ndarray
    occupation: np.ndarray
    stderr: np.ndarray
    batch_occupation: np.ndarray = field(repr=False)
    total_time: float = 0.0
    burn_in: float = 0.0

    def pgf(self, s: float) -> tuple[float, float]:
        """``phi(s) = sum_n nu(n) s**n`` with a propagated standard error."""
        vals = self.batch_occupation @ (float(s) ** self.states)
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))

    def pgf_increments(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Increments of the pgf across consecutive points, with errors."""
        points = np.asarray(points, dtype=float)
        per_batch = np.stack([self.batch_occupation @ (p**self.states) for p in points], axis=1)
        inc = np.diff(np.concatenate([np.zeros((per_batch.shape[0], 1)), per_batch], axis=1), axis=1)
        return inc.mean(axis=0), inc.std(axis=0, ddof=1) / math.sqrt(inc.shape[0])


def stationary_and_pgf(
    model: AncestralModel,
    n0: int,
    total_time: float,
    burn_in: float | None,
    rng: np.random.Generator,
    *,
    batches: int = 50,
) -> StationaryEstimate:
    """Occupation-time estimate of the stationary law of the chain.

    Post-burn-in time is split into equal windows; per-window occupation
    fractions give batch-means standard errors.  Aborts with
    :class:`TransienceError` if the state escapes past the model's cap,
    which a positive recurrent chain at these parameters will not reach.
    """
    if burn_in is None:
        burn_in = 0.1 * total_time
    if not 0.0 <= burn_in < total_time:
        raise ValueError("need 0 <= burn_in < total_time")
    if batches < 2:
        raise ValueError("need at least two batches")
    window = (total_time - burn_in) / batches
    occ: dict[int, np.ndarray] = {}

    def deposit(state: int, a: float, b: float) -> None:
        row = occ.get(state)
        if row is None:
            row = occ.setdefault(state, np.zeros(batches))
        i = int((a - burn_in) / window)
        while a < b - 1e-18 and i < batches:
            edge = burn_in + (i + 1) * window
            row[i] += min(b, edge) - a
            a = edge
            i += 1

    t, n = 0.0, int(n0)
    while t < total_time:
        targets, _, cum, total = model.rates(n)
        if total <= 0.0:
            hold = total_time - t
            nxt = n
        else:
            hold = rng.exponential(1.0 / total)
            nxt = int(targets[np.searchsorted(cum, rng.random() * total)])
        a, b = max(t, burn_in), min(t + hold, total_time)
        if b > a:
            deposit(n, a, b)
        t += hold
        n = nxt
        if n > model.n_cap:
            raise TransienceError(
                f"lineage count escaped past {model.n_cap}: the chain looks transient",
                state=n,
                time=t,
            )

    states = np.array(sorted(occ), dtype=np.int64)
    batch_occ = np.stack([occ[s] for s in states], axis=1) / window
    occupation = batch_occ.mean(axis=0)
    stderr = batch_occ.std(axis=0, ddof=1) / math.sqrt(batches)
    return StationaryEstimate(
        states=states,
        occupation=occupation,
        stderr=stderr,
        batch_occupation=batch_occ,
        total_time=total_time,
        burn_in=burn_in,
    )


def stationary_exact(model: AncestralModel, n_max: int) -> np.ndarray:
    """Stationary law of the generator truncated at ``n_max`` (test oracle)."""
    Q = np.zeros((n_max, n_max))
    for n in range(1, n_max + 1):
        targets, rates, _, _ = model.rates(n)
        for tgt, rate in zip(targets, rates):
            if tgt <= n_max:
                Q[n - 1, tgt - 1] += rate
                Q[n - 1, n - 1] -= rate
    A = np.vstack([Q.T, np.ones(n_max)])
    b = np.concatenate([np.zeros(n_max), [1.0]])
    nu, *_ = np.linalg.lstsq(A, b, rcond=None)
    return np.clip(nu, 0.0, None) / np.clip(nu, 0.0, None).sum()


@dataclass
class FixationPrediction:
    """Predicted fixation probabilities with their provenance."""

    probs: np.ndarray
    stderr: np.ndarray
    regime: str  # "recurrent" or "transient"
    kappa_star: float


def fixation_probabilities(
    model: AncestralModel,
    x0,
    *,
    drift_kind: str = "transitive",
    rng: np.random.Generator | None = None,
    total_time: float = 2e5,
    burn_in: float | None = None,
    batches: int = 50,
) -> FixationPrediction:
    """Fixation probability of each type under ordered contests.

    Positive recurrent regime: the probability that type i fixes is the pgf
    increment ``phi(c_i) - phi(c_(i-1))`` across the cumulative initial
    frequencies.  Transient regime (``sigma = 0`` and ``kappa >=
    kappa_star``): the highest labelled type present fixes surely.

    Only the ordered-contest (transitive) scheme has this dual description;
    other drift kinds are refused.
    """
    if drift_kind != "transitive":
        raise ValueError(f"fixation probabilities via the dual chain require the transitive scheme, got {drift_kind!r}")
    x0 = freqs_of(x0)
    ks = model.kappa_star
    if model.kappa == 0.0:
        # Pure-death dual: stationary law is concentrated at 1, pgf(s) = s.
        return FixationPrediction(x0.copy(), np.zeros_like(x0), "recurrent", ks)
    if model.is_positive_recurrent():
        if rng is None:
            raise ValueError("the recurrent branch estimates the stationary pgf: pass an rng")
        est = stationary_and_pgf(model, 1, total_time, burn_in, rng, batches=batches)
        probs, stderr = est.pgf_increments(np.cumsum(x0))
        return FixationPrediction(probs, stderr, "recurrent", ks)
    probs = np.zeros_like(x0)
    probs[np.flatnonzero(x0 > 0.0).max()] = 1.0
    return FixationPrediction(probs, np.zeros_like(x0), "transient", ks)
