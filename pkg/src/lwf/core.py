"""Shared domain types: frequency vectors, offspring laws, scaling schedules.

The state of every process in this package is a point on the face
``x_1 + ... + x_K = 1`` of the K-simplex: the vector of type frequencies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ScheduleError
from .measures import LambdaMeasure, TruncatedSizeLaw

SIMPLEX_TOL = 1e-12


def as_frequencies(x, *, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate and return ``x`` as a float frequency vector.

    Requires K >= 2, coordinates in [0, 1] and total 1 within ``tol``.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"frequency vector must be 1-d with K >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("frequency vector has non-finite entries")
    if arr.min() < -tol or arr.max() > 1.0 + tol:
        raise ValueError(f"coordinates must lie in [0, 1], got {arr}")
    total = float(arr.sum())
    if abs(total - 1.0) > max(tol, arr.size * 2e-16):
        raise ValueError(f"coordinates must sum to 1 (got {total!r})")
    return np.clip(arr, 0.0, 1.0)


@dataclass(frozen=True)
class SimplexPoint:
    """Immutable frequency vector over K types."""

    freqs: np.ndarray

    def __post_init__(self):
        arr = as_frequencies(self.freqs)
        arr.flags.writeable = False
        object.__setattr__(self, "freqs", arr)

    @property
    def K(self) -> int:
        return self.freqs.size

    @classmethod
    def uniform(cls, K: int) -> "SimplexPoint":
        return cls(np.full(K, 1.0 / K))

    @classmethod
    def vertex(cls, K: int, i: int) -> "SimplexPoint":
        x = np.zeros(K)
        x[i] = 1.0
        return cls(x)

    def __iter__(self):
        return iter(self.freqs)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.freqs, dtype=dtype)


def freqs_of(x) -> np.ndarray:
    """Accept a SimplexPoint or array-like; return a validated ndarray."""
    if isinstance(x, SimplexPoint):
        return np.array(x.freqs)
    return as_frequencies(x)


def round_to_counts(x, N: int) -> np.ndarray:
    """Apportion ``x`` to integer type counts summing to ``N``.

    Largest-remainder rounding: floor everything, then hand the leftover
    slots to the largest fractional parts (ties broken by lower index).
    """
    x = freqs_of(x)
    raw = x * N
    counts = np.floor(raw).astype(np.int64)
    short = N - int(counts.sum())
    if short > 0:
        order = np.lexsort((np.arange(x.size), -(raw - counts)))
        counts[order[:short]] += 1
    return counts


def random_interior_points(rng: np.random.Generator, K: int, n: int, min_coord: float = 0.02) -> np.ndarray:
    """Uniform simplex points conditioned away from the boundary."""
    out = np.empty((n, K))
    filled = 0
    while filled < n:
        cand = rng.dirichlet(np.ones(K), size=n - filled)
        good = cand.min(axis=1) >= min_coord
        m = int(good.sum())
        out[filled : filled + m] = cand[good]
        filled += m
    return out


# ---------------------------------------------------------------------------
# Offspring law
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OffspringLaw:
    """Number of potential parents sampled by one offspring.

    ``P(1) = 1 - rho`` and ``P(k) = rho * tail[k]`` for ``k >= 2``.  ``rho``
    is the selection-strength knob that is sent to zero in the scaling limit;
    ``tail`` is the fixed conditional law of larger samples.
    """

    rho: float
    tail: tuple[tuple[int, float], ...]

    def __init__(self, rho: float, tail):
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {rho}")
        if isinstance(tail, dict):
            items = sorted((int(k), float(p)) for k, p in tail.items())
        else:
            items = sorted((int(k), float(p)) for k, p in tail)
        items = [(k, p) for k, p in items if p > 0.0]
        if not items:
            raise ValueError("tail must give positive weight to some k >= 2")
        for k, p in items:
            if k < 2:
                raise ValueError(f"tail sample sizes must be >= 2, got {k}")
            if p < 0:
                raise ValueError("tail weights must be nonnegative")
        total = sum(p for _, p in items)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"tail weights must sum to 1, got {total}")
        items = [(k, p / total) for k, p in items]
        object.__setattr__(self, "rho", float(rho))
        object.__setattr__(self, "tail", tuple(items))

    def pmf(self, k: int) -> float:
        if k == 1:
            return 1.0 - self.rho
        return self.rho * dict(self.tail).get(k, 0.0)

    @property
    def beta(self) -> float:
        """Mean number of extra potential parents given more than one."""
        return sum((k - 1) * p for k, p in self.tail)

    @property
    def max_k(self) -> int:
        return self.tail[-1][0]

    def increments(self) -> dict[int, float]:
        """Conditional law reindexed by the extra-parent count ``k - 1``."""
        return {k - 1: p for k, p in self.tail}

    def with_rho(self, rho: float) -> "OffspringLaw":
        return OffspringLaw(rho, self.tail)

    def to_config(self) -> dict:
        return {str(k): p for k, p in self.tail}


# ---------------------------------------------------------------------------
# Scaling schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingSchedule:
    """All N-dependent parameters of one finite-population model.

    ``rho`` couples selection to N (``kappa/(sigma*N)`` when a diffusion part
    is wanted, ``N**-b`` with ``2*alpha < b < 1`` otherwise), ``gamma`` is the
    per-generation probability of an extreme reproductive event, and
    ``size_law`` is the normalized truncation of ``L(dz)/z**2`` at
    ``N**-alpha`` used to draw event sizes.
    """

    N: int
    alpha: float
    kappa: float
    sigma: float
    measure: LambdaMeasure
    offspring: OffspringLaw
    b: float | None
    rho: float
    gamma: float
    event_mass: float          # ∫_{z >= N**-alpha} L(dz)/z**2
    truncation: float          # N**-alpha
    clamped: bool
    size_law: TruncatedSizeLaw | None = field(repr=False, default=None)


def make_schedule(
    N: int,
    alpha: float,
    kappa: float,
    sigma: float,
    measure: LambdaMeasure,
    tail,
    *,
    b: float | None = None,
) -> ScalingSchedule:
    """Build the N-dependent parameters for a finite-population run.

    Raises :class:`ScheduleError` when no admissible ``rho`` keeps the event
    probability at most 1 ("N too small for this measure"); merely clamps
    (with a flag and a warning) when the supplied exponent overshoots but a
    larger admissible one would work.
    """
    if N < 2:
        raise ScheduleError(f"population size must be >= 2, got {N}")
    if not 0.0 < alpha < 0.5:
        raise ScheduleError(f"alpha must lie in (0, 1/2), got {alpha}")
    if kappa <= 0:
        raise ScheduleError(f"kappa must be positive, got {kappa}")
    if sigma < 0:
        raise ScheduleError(f"sigma must be nonnegative, got {sigma}")

    if sigma > 0:
        if b is not None:
            raise ScheduleError("exponent b only applies when sigma = 0")
        rho = kappa / (sigma * N)
        if rho > 1.0:
            raise ScheduleError(f"kappa/(sigma*N) = {rho} > 1: N too small for this kappa/sigma")
    else:
        if b is None:
            b = (2.0 * alpha + 1.0) / 2.0
        if not 2.0 * alpha < b < 1.0:
            raise ScheduleError(f"need 2*alpha < b < 1, got b={b} with alpha={alpha}")
        rho = N ** (-b)

    truncation = N ** (-alpha)
    event_mass = measure.resampling_mass_above(truncation)
    gamma = event_mass * rho / kappa
    clamped = False
    if gamma > 1.0:
        if event_mass / (N * kappa) > 1.0 or sigma > 0:
            raise ScheduleError(
                f"event probability {gamma:.3g} > 1 at the smallest admissible rho: N too small for this measure"
            )
        warnings.warn(
            f"event probability clamped from {gamma:.3g} to 1; results will not follow the scaling regime",
            stacklevel=2,
        )
        gamma = 1.0
        clamped = True

    size_law = TruncatedSizeLaw(measure, truncation) if event_mass > 0 else None
    offspring = OffspringLaw(rho, tail)
    return ScalingSchedule(
        N=int(N),
        alpha=float(alpha),
        kappa=float(kappa),
        sigma=float(sigma),
        measure=measure,
        offspring=offspring,
        b=None if sigma > 0 else float(b),
        rho=float(rho),
        gamma=float(gamma),
        event_mass=float(event_mass),
        truncation=float(truncation),
        clamped=clamped,
        size_law=size_law,
    )
