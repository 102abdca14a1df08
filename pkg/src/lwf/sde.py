"""Euler-Maruyama integration of the limit jump-diffusion on the simplex.

The process combines three parts:

* a drift ``mu(x)`` per unit time,
* a diffusion ``sqrt(sigma) * zeta(x) dB`` whose lower-triangular factor
  reproduces the multinomial-resampling covariance
  ``Sigma_ij(x) = x_i (1_{i=j} - x_j)``,
* jumps ``x -> (1-z) x + z e_i`` at rate ``x_i L(dz)/z**2``, one parent of
  type i replacing a fraction z of the population.

Jumps below a size cutoff ``eps_jump`` are dropped: for fixed z the jump
integrand averages to zero over the uniform mark, so truncation discards
mean-zero noise and introduces no drift bias (only the vanishing variance of
sub-cutoff jumps, reported as a diagnostic).  The diffusion step is followed
by a projection onto the simplex (clamp negatives, renormalize) whose bias
near the boundary is dominated by the Euler error; jump steps are convex
combinations and preserve the simplex exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import freqs_of
from .measures import LambdaMeasure, TruncatedSizeLaw, ZeroMeasure
from .trajectory import Trajectory

_TINY = 1e-14


def zeta(x) -> np.ndarray:
    """Lower-triangular square root of the resampling covariance.

    For suffix sums ``S_j = x_(j+1) + ... + x_K`` (so ``S_0 = 1`` on the
    face), the nonzero entries are::

        zeta[i, i] = sqrt(x_i * S_(i+1) / S_i)
        zeta[i, j] = -x_i * sqrt(x_j / (S_j * S_(j+1)))      for i > j

    Entries whose denominators vanish are set to zero, which is the limit of
    the formula on the simplex (the numerators vanish at least as fast).
    Batch aware: ``x`` may have shape ``(..., K)``.
    """
    x = np.asarray(x, dtype=float)
    K = x.shape[-1]
    S = np.flip(np.cumsum(np.flip(x, -1), axis=-1), -1)
    S_next = np.concatenate([S[..., 1:], np.zeros(x.shape[:-1] + (1,))], axis=-1)

    safe_S = np.where(S > _TINY, S, 1.0)
    diag = np.sqrt(np.clip(np.where(S > _TINY, x * S_next / safe_S, 0.0), 0.0, None))

    denom = S * S_next
    safe_denom = np.where(denom > _TINY, denom, 1.0)
    col = np.sqrt(np.clip(np.where(denom > _TINY, x / safe_denom, 0.0), 0.0, None))

    out = np.where(np.tri(K, K, -1, dtype=bool), -x[..., :, None] * col[..., None, :], 0.0)
    idx = np.arange(K)
    out[..., idx, idx] = diag
    return out


@dataclass
class SdeConfig:
    """Parameters of one integration run.

    ``drift`` is any callable mapping ``(..., K)`` states to drift vectors
    (a :class:`~lwf.selection.DriftFunction` fits).  ``tol_ext`` is the
    extinction clamp: coordinates at or below it are set to zero with the
    rest renormalized (0 disables everything except exact zeros produced by
    the projection).
    """

    K: int
    drift: object
    sigma: float
    measure: LambdaMeasure
    dt: float
    horizon: float
    eps_jump: float = 1e-3
    tol_ext: float = 0.0
    jump_rate: float = field(init=False)
    size_law: TruncatedSizeLaw | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("need at least two types")
        if self.sigma < 0 or self.dt <= 0 or self.horizon < 0:
            raise ValueError("need sigma >= 0, dt > 0, horizon >= 0")
        if not 0.0 < self.eps_jump < 1.0:
            raise ValueError("eps_jump must lie in (0, 1)")
        if self.tol_ext < 0:
            raise ValueError("tol_ext must be nonnegative")
        if self.drift is None:
            self.drift = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        if self.measure is None:
            self.measure = ZeroMeasure()
        self.jump_rate = self.measure.resampling_mass_above(self.eps_jump)
        if self.jump_rate > 0.0:
            self.size_law = TruncatedSizeLaw(self.measure, self.eps_jump)
            if self.dt * self.jump_rate > 0.1:
                warnings.warn(
                    f"dt * jump rate = {self.dt * self.jump_rate:.3g} > 0.1: "
                    "multiple jumps will often share a step",
                    stacklevel=2,
                )

    @property
    def truncated_jump_mass(self) -> float:
        """Diagnostic: plain measure mass below the jump cutoff."""
        if self.size_law is None:
            return 0.0
        return self.size_law.truncated_mass


def _project(Y: np.ndarray) -> np.ndarray:
    np.maximum(Y, 0.0, out=Y)
    s = Y.sum(axis=1)
    need = s != 1.0
    if need.any():
        Y[need] /= s[need, None]
    return Y


def _advance(cfg: SdeConfig, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One Euler step plus the jumps binned into it, for active rows."""
    Y = X + cfg.dt * np.asarray(cfg.drift(X), dtype=float)
    if cfg.sigma > 0.0:
        noise = rng.standard_normal(X.shape)
        Y += math.sqrt(cfg.sigma * cfg.dt) * np.einsum("rij,rj->ri", zeta(X), noise)
    Y = _project(Y)
    if cfg.jump_rate > 0.0:
        n_jumps = rng.poisson(cfg.jump_rate * cfg.dt, X.shape[0])
        round_ = 1
        while True:
            rows = np.flatnonzero(n_jumps >= round_)
            if rows.size == 0:
                break
            z = cfg.size_law.sample(rng, rows.size)
            cdf = np.cumsum(Y[rows], axis=1)
            target = (cdf < (rng.random(rows.size) * cdf[:, -1])[:, None]).sum(axis=1)
            target = target.clip(max=cfg.K - 1)
            Y[rows] *= (1.0 - z)[:, None]
            Y[rows, target] += z
            round_ += 1
    return Y


def step_em(cfg: SdeConfig, x, rng: np.random.Generator) -> np.ndarray:
    """Advance a single state by one time step ``dt``."""
    x = freqs_of(x)
    return _advance(cfg, np.array(x)[None, :], rng)[0]


class BatchSde:
    """Replicates of one configuration advanced in lockstep.

    Tracks, per replicate, the time each coordinate hit zero, the fixation
    time and winning type, and whether the extinction clamp fired.  Fixed
    replicates stop consuming random numbers, so runs are reproducible for a
    given stream regardless of how far others have progressed.

    Vertices are treated as absorbing, which is exact for mutation-free
    drifts (drift, diffusion and jumps all vanish there).
    """

    def __init__(self, cfg: SdeConfig, x0, replicates: int, rng: np.random.Generator):
        self.cfg = cfg
        x0 = freqs_of(x0)
        if x0.size != cfg.K:
            raise ValueError(f"state has {x0.size} coordinates, config says {cfg.K}")
        self.rng = rng
        self.R = int(replicates)
        self.X = np.tile(x0, (self.R, 1))
        self.steps = 0
        self.extinction_time = np.tile(np.where(x0 == 0.0, 0.0, np.nan), (self.R, 1))
        self.fixation_time = np.full(self.R, np.nan)
        self.winner = np.full(self.R, -1, dtype=np.int64)
        self.clamp_fired = np.zeros(self.R, dtype=bool)
        self._settle(np.arange(self.R))

    @property
    def t(self) -> float:
        return self.steps * self.cfg.dt

    @property
    def active(self) -> np.ndarray:
        return self.winner < 0

    def _settle(self, rows: np.ndarray) -> None:
        """Apply the extinction clamp and record boundary events on rows."""
        if rows.size == 0:
            return
        X = self.X[rows]
        if self.cfg.tol_ext > 0.0:
            small = (X > 0.0) & (X <= self.cfg.tol_ext)
            hit = small.any(axis=1)
            if hit.any():
                X[small] = 0.0
                X[hit] /= X[hit].sum(axis=1, keepdims=True)
                self.clamp_fired[rows[hit]] = True
                self.X[rows] = X
        newly_zero = (X == 0.0) & np.isnan(self.extinction_time[rows])
        if newly_zero.any():
            ext = self.extinction_time[rows]
            ext[newly_zero] = self.t
            self.extinction_time[rows] = ext
        done = (X == 1.0).any(axis=1)
        if done.any():
            sub = rows[done]
            self.winner[sub] = self.X[sub].argmax(axis=1)
            self.fixation_time[sub] = self.t

    def step(self) -> None:
        rows = np.flatnonzero(self.active)
        self.steps += 1
        if rows.size:
            self.X[rows] = _advance(self.cfg, self.X[rows], self.rng)
            self._settle(rows)

    def advance_to(self, t_target: float) -> None:
        n_target = int(round(t_target / self.cfg.dt))
        while self.steps < n_target:
            self.step()

    def run_to_fixation(self, max_time: float | None = None) -> int:
        """Step until every replicate is fixed; returns the unfixed count."""
        limit = math.inf if max_time is None else int(round(max_time / self.cfg.dt))
        while self.active.any() and self.steps < limit:
            self.step()
        return int(self.active.sum())

    def boundary_hit(self) -> np.ndarray:
        """Replicates that have lost at least one type (or been clamped)."""
        return ~np.isnan(self.extinction_time).all(axis=1) | self.clamp_fired


@dataclass
class SdeRun:
    """A recorded single-replicate run with its boundary events."""

    trajectory: Trajectory
    extinction_times: np.ndarray
    fixation_time: float
    winner: int


def simulate_sde(cfg: SdeConfig, x0, record_every: int, rng: np.random.Generator) -> SdeRun:
    """Integrate one path to the horizon, recording every r-th step."""
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    batch = BatchSde(cfg, x0, 1, rng)
    n_steps = int(round(cfg.horizon / cfg.dt))
    times = [0.0]
    states = [batch.X[0].copy()]
    for s in range(1, n_steps + 1):
        batch.step()
        if s % record_every == 0:
            times.append(batch.t)
            states.append(batch.X[0].copy())
    winner = int(batch.winner[0])
    return SdeRun(
        trajectory=Trajectory(np.array(times), np.array(states)),
        extinction_times=batch.extinction_time[0].copy(),
        fixation_time=float(batch.fixation_time[0]),
        winner=winner,
    )
