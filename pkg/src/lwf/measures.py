"""Finite measures on (0, 1] driving heavy reproductive events.

A measure ``L`` here plays two roles:

* forward in time it is the size law of extreme reproductive events, through
  the normalized truncation of ``L(dz)/z**2`` (see :class:`TruncatedSizeLaw`);
* backward in time it sets the multiple-merger collision rates of the
  lineage-count chain through ``lambda_nk = ∫ y**(k-2) (1-y)**(n-k) L(dy)``.

No variant carries an atom at zero: pure-diffusion resampling is handled by a
separate coefficient everywhere in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats


class LambdaMeasure:
    """Base class for the supported measure variants.

    Subclasses are immutable value objects.  Continuous variants expose a
    density; atomic variants expose their atom list; quadrature-based
    oracles combine both (see :func:`lambda_nk_quadrature`).
    """

    kind: str = ""

    # -- basic mass queries -------------------------------------------------

    def total_mass(self) -> float:
        raise NotImplementedError

    def mass_above(self, lo: float) -> float:
        """Measure of ``[lo, 1]``."""
        raise NotImplementedError

    def resampling_mass_above(self, lo: float) -> float:
        """``∫_[lo,1] L(dz) / z**2``, the total event rate above a size cutoff."""
        raise NotImplementedError

    # -- structure for quadrature / sampling --------------------------------

    def atoms(self) -> tuple[tuple[float, float], ...]:
        """Atomic part as ``((z, weight), ...)``; empty for continuous laws."""
        return ()

    def density(self, y: np.ndarray) -> np.ndarray:
        """Density of the absolutely continuous part (zero if none)."""
        return np.zeros_like(np.asarray(y, dtype=float))

    @property
    def has_continuous_part(self) -> bool:
        return False

    @property
    def is_zero(self) -> bool:
        return self.total_mass() == 0.0

    # -- closed-form integrals ----------------------------------------------

    def collision_integral(self, n: int, k: int) -> float:
        """Closed form of ``∫ y**(k-2) (1-y)**(n-k) L(dy)``."""
        raise NotImplementedError

    def collision_rate_vector(self, n: int) -> np.ndarray:
        """Rates ``C(n,k) * lambda_nk`` for ``k = 2..n`` (stable evaluation)."""
        raise NotImplementedError

    def log_penalty(self) -> float:
        """``∫ |log(1-y)| L(dy) / y**2``; ``inf`` when divergent."""
        raise NotImplementedError

    # -- config -------------------------------------------------------------

    def to_config(self) -> dict:
        raise NotImplementedError


def _check_nk(n: int, k: int) -> None:
    if k < 2 or k > n:
        raise ValueError(f"need 2 <= k <= n, got n={n}, k={k}")


def _atom_collision_rates(n: int, z: float, weight_over_z2: float) -> np.ndarray:
    ks = np.arange(2, n + 1)
    return weight_over_z2 * stats.binom.pmf(ks, n, z)


@dataclass(frozen=True)
class ZeroMeasure(LambdaMeasure):
    """The empty measure: no extreme events, no multiple mergers."""

    kind = "zero"

    def total_mass(self) -> float:
        return 0.0

    def mass_above(self, lo: float) -> float:
        return 0.0

    def resampling_mass_above(self, lo: float) -> float:
        return 0.0

    def collision_integral(self, n: int, k: int) -> float:
        _check_nk(n, k)
        return 0.0

    def collision_rate_vector(self, n: int) -> np.ndarray:
        return np.zeros(max(n - 1, 0))

    def log_penalty(self) -> float:
        return 0.0

    def to_config(self) -> dict:
        return {"kind": "zero"}


@dataclass(frozen=True)
class PointMass(LambdaMeasure):
    """``mass`` concentrated at a single size ``z`` in (0, 1]."""

    z: float
    mass: float = 1.0

    kind = "point_mass"

    def __post_init__(self):
        if not 0.0 < self.z <= 1.0:
            raise ValueError(f"atom must lie in (0, 1], got {self.z}")
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    def total_mass(self) -> float:
        return self.mass

    def mass_above(self, lo: float) -> float:
        return self.mass if self.z >= lo else 0.0

    def resampling_mass_above(self, lo: float) -> float:
        return self.mass / self.z**2 if self.z >= lo else 0.0

    def atoms(self):
        return ((self.z, self.mass),)

    def collision_integral(self, n: int, k: int) -> float:
        _check_nk(n, k)
        return self.mass * self.z ** (k - 2) * (1.0 - self.z) ** (n - k)

    def collision_rate_vector(self, n: int) -> np.ndarray:
        return _atom_collision_rates(n, self.z, self.mass / self.z**2)

    def log_penalty(self) -> float:
        if self.z == 1.0:
            return math.inf
        return self.mass * (-math.log1p(-self.z)) / self.z**2

    def to_config(self) -> dict:
        return {"kind": "point_mass", "z": self.z, "mass": self.mass}


@dataclass(frozen=True)
class FiniteAtoms(LambdaMeasure):
    """Finitely many atoms ``(z_i, w_i)`` with ``z_i`` in (0, 1]."""

    pairs: tuple[tuple[float, float], ...]

    kind = "finite_atoms"

    def __init__(self, pairs):
        pairs = tuple((float(z), float(w)) for z, w in pairs)
        if not pairs:
            raise ValueError("need at least one atom (use ZeroMeasure for none)")
        for z, w in pairs:
            if not 0.0 < z <= 1.0:
                raise ValueError(f"atom must lie in (0, 1], got {z}")
            if w <= 0:
                raise ValueError("atom weights must be positive")
        object.__setattr__(self, "pairs", pairs)

    def total_mass(self) -> float:
        return sum(w for _, w in self.pairs)

    def mass_above(self, lo: float) -> float:
        return sum(w for z, w in self.pairs if z >= lo)

    def resampling_mass_above(self, lo: float) -> float:
        return sum(w / z**2 for z, w in self.pairs if z >= lo)

    def atoms(self):
        return self.pairs

    def collision_integral(self, n: int, k: int) -> float:
        _check_nk(n, k)
        return sum(w * z ** (k - 2) * (1.0 - z) ** (n - k) for z, w in self.pairs)

    def collision_rate_vector(self, n: int) -> np.ndarray:
        out = np.zeros(n - 1)
        for z, w in self.pairs:
            out += _atom_collision_rates(n, z, w / z**2)
        return out

    def log_penalty(self) -> float:
        if any(z == 1.0 for z, _ in self.pairs):
            return math.inf
        return sum(w * (-math.log1p(-z)) / z**2 for z, w in self.pairs)

    def to_config(self) -> dict:
        return {"kind": "finite_atoms", "atoms": [[z, w] for z, w in self.pairs]}


@dataclass(frozen=True)
class UniformLaw(LambdaMeasure):
    """Lebesgue measure on [0, 1] scaled to total ``mass``."""

    mass: float = 1.0

    kind = "uniform"

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    def total_mass(self) -> float:
        return self.mass

    def mass_above(self, lo: float) -> float:
        return self.mass * max(1.0 - lo, 0.0)

    def resampling_mass_above(self, lo: float) -> float:
        if lo <= 0:
            return math.inf
        return self.mass * (1.0 / lo - 1.0) if lo < 1.0 else 0.0

    def density(self, y):
        y = np.asarray(y, dtype=float)
        return np.full_like(y, self.mass)

    @property
    def has_continuous_part(self) -> bool:
        return True

    def collision_integral(self, n: int, k: int) -> float:
        _check_nk(n, k)
        # ∫ y**(k-2) (1-y)**(n-k) dy = B(k-1, n-k+1)
        return self.mass * math.exp(special.betaln(k - 1, n - k + 1))

    def collision_rate_vector(self, n: int) -> np.ndarray:
        ks = np.arange(2, n + 1)
        logc = special.gammaln(n + 1) - special.gammaln(ks + 1) - special.gammaln(n - ks + 1)
        return self.mass * np.exp(logc + special.betaln(ks - 1, n - ks + 1))

    def log_penalty(self) -> float:
        # |log(1-y)|/y**2 ~ 1/y near zero, so the integral diverges at 0.
        return math.inf

    def to_config(self) -> dict:
        return {"kind": "uniform", "mass": self.mass}


@dataclass(frozen=True)
class BetaLaw(LambdaMeasure):
    """Beta(a, b) density scaled to total ``mass``."""

    a: float
    b: float
    mass: float = 1.0

    kind = "beta"

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("Beta shape parameters must be positive")
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    def total_mass(self) -> float:
        return self.mass

    def mass_above(self, lo: float) -> float:
        return self.mass * float(special.betainc(self.a, self.b, 1.0) - special.betainc(self.a, self.b, np.clip(lo, 0.0, 1.0)))

    def resampling_mass_above(self, lo: float) -> float:
        if lo >= 1.0:
            return 0.0
        if self.a > 2.0:
            scale = math.exp(special.betaln(self.a - 2.0, self.b) - special.betaln(self.a, self.b))
            tail = 1.0 - float(special.betainc(self.a - 2.0, self.b, lo)) if lo > 0 else 1.0
            return self.mass * scale * tail
        if lo <= 0.0:
            return math.inf
        val, _ = integrate.quad(lambda y: self.density(y) / y**2, lo, 1.0, epsabs=0.0, epsrel=1e-11, limit=200)
        return float(val)

    def density(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.mass * np.exp(
                (self.a - 1.0) * np.log(y) + (self.b - 1.0) * np.log1p(-y) - special.betaln(self.a, self.b)
            )
        return np.where((y > 0) & (y < 1), out, np.where((y == 0) | (y == 1), _beta_edge(self.a, self.b, y, self.mass), 0.0))

    @property
    def has_continuous_part(self) -> bool:
        return True

    def collision_integral(self, n: int, k: int) -> float:
        _check_nk(n, k)
        # ∫ y**(k-2) (1-y)**(n-k) Beta(a,b)(dy) = B(a+k-2, b+n-k) / B(a, b)
        return self.mass * math.exp(special.betaln(self.a + k - 2, self.b + n - k) - special.betaln(self.a, self.b))

    def collision_rate_vector(self, n: int) -> np.ndarray:
        ks = np.arange(2, n + 1)
        logc = special.gammaln(n + 1) - special.gammaln(ks + 1) - special.gammaln(n - ks + 1)
        return self.mass * np.exp(logc + special.betaln(self.a + ks - 2, self.b + n - ks) - special.betaln(self.a, self.b))

    def log_penalty(self) -> float:
        # Integrand ~ y**(a-2) near zero: integrable only for a > 1.
        if self.a <= 1.0:
            return math.inf
        val, _ = integrate.quad(
            lambda y: -math.log1p(-y) * float(self.density(y)) / y**2,
            0.0,
            1.0,
            epsabs=0.0,
            epsrel=1e-11,
            limit=400,
            points=[1e-6, 1.0 - 1e-6],
        )
        return float(val)

    def to_config(self) -> dict:
        return {"kind": "beta", "a": self.a, "b": self.b, "mass": self.mass}


def _beta_edge(a, b, y, mass):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if a == 1.0:
        out = np.where(y == 0.0, mass * math.exp(-special.betaln(a, b)), out)
    if b == 1.0:
        out = np.where(y == 1.0, mass * math.exp(-special.betaln(a, b)), out)
    return out


_VARIANTS = {cls.kind: cls for cls in (ZeroMeasure, PointMass, FiniteAtoms, UniformLaw, BetaLaw)}


def measure_from_config(block: dict) -> LambdaMeasure:
    from .errors import ConfigError

    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("measure block must be a mapping with a 'kind' key")
    kind = block["kind"]
    extra = dict(block)
    extra.pop("kind")
    try:
        if kind == "zero":
            _reject_unknown(extra, (), "lambda")
            return ZeroMeasure()
        if kind == "point_mass":
            _reject_unknown(extra, ("z", "mass"), "lambda")
            return PointMass(float(extra["z"]), float(extra.get("mass", 1.0)))
        if kind == "finite_atoms":
            _reject_unknown(extra, ("atoms",), "lambda")
            return FiniteAtoms(extra["atoms"])
        if kind == "uniform":
            _reject_unknown(extra, ("mass",), "lambda")
            return UniformLaw(float(extra.get("mass", 1.0)))
        if kind == "beta":
            _reject_unknown(extra, ("a", "b", "mass"), "lambda")
            return BetaLaw(float(extra["a"]), float(extra["b"]), float(extra.get("mass", 1.0)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad lambda block: {exc}") from exc
    raise ConfigError(f"unknown lambda kind {kind!r} (expected one of {sorted(_VARIANTS)})")


def _reject_unknown(block: dict, allowed, where: str) -> None:
    from .errors import ConfigError

    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where} block: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def lambda_total_mass(measure: LambdaMeasure) -> float:
    """Total mass of the measure."""
    return measure.total_mass()


def lambda_nk(measure: LambdaMeasure, n: int, k: int) -> float:
    """Collision intensity ``∫ y**(k-2) (1-y)**(n-k) L(dy)`` for ``2 <= k <= n``.

    Closed forms are used for every built-in variant; see
    :func:`lambda_nk_quadrature` for the independent numerical route.
    """
    _check_nk(n, k)
    return measure.collision_integral(n, k)


def lambda_nk_quadrature(measure: LambdaMeasure, n: int, k: int, rel_tol: float = 1e-10) -> float:
    """Numerical-quadrature evaluation of :func:`lambda_nk`.

    Atomic parts are summed directly; the continuous part is integrated with
    adaptive quadrature.  Kept independent of the closed forms so the two
    routes can be cross-checked.
    """
    _check_nk(n, k)
    total = 0.0
    for z, w in measure.atoms():
        total += w * z ** (k - 2) * (1.0 - z) ** (n - k)
    if measure.has_continuous_part:
        val, _ = integrate.quad(
            lambda y: float(measure.density(y)) * y ** (k - 2) * (1.0 - y) ** (n - k),
            0.0,
            1.0,
            epsabs=0.0,
            epsrel=rel_tol * 1e-2,
            limit=400,
        )
        total += val
    return total


def kappa_star(measure: LambdaMeasure, beta: float) -> float:
    """Selection threshold ``(1/beta) ∫ |log(1-y)| L(dy) / y**2``.

    Returns ``inf`` (a usable value, not an error) when the integral
    diverges: any atom at 1, any density with too much mass near 0.  The
    absolute value makes the threshold nonnegative so that the recurrence
    condition ``kappa < kappa_star`` is satisfiable; the opposite
    orientation is available as :func:`kappa_star_signed`.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    return measure.log_penalty() / beta


def kappa_star_signed(measure: LambdaMeasure, beta: float) -> float:
    """Same integral with ``log(1-y) <= 0`` kept signed (so the value is <= 0)."""
    return -kappa_star(measure, beta)


def kappa_star_quadrature(measure: LambdaMeasure, beta: float) -> float:
    """Quadrature/summation route for :func:`kappa_star` (test oracle)."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    total = 0.0
    for z, w in measure.atoms():
        if z == 1.0:
            return math.inf
        total += w * (-math.log1p(-z)) / z**2
    if measure.has_continuous_part:
        probe = measure.density(np.array([1e-9])) * 1e-9  # ~ y * density(y) / y**2 * y
        if probe[0] > 1e-12:
            return math.inf
        val, _ = integrate.quad(
            lambda y: -math.log1p(-y) * float(measure.density(y)) / y**2,
            0.0,
            1.0,
            epsabs=0.0,
            epsrel=1e-10,
            limit=400,
            points=[1e-6, 1.0 - 1e-6],
        )
        total += val
    return total / beta


# ---------------------------------------------------------------------------
# Sampling the event-size law
# ---------------------------------------------------------------------------


class TruncatedSizeLaw:
    """Normalized restriction of ``L(dz)/z**2`` to ``[eps, 1]``.

    This is the law of the replacement fraction of an extreme reproductive
    event, and the jump-size law of the limit process once sizes below
    ``eps`` are discarded (they contribute no drift, only vanishing
    variance).
    """

    def __init__(self, measure: LambdaMeasure, eps: float):
        if not 0.0 < eps <= 1.0:
            raise ValueError("truncation threshold must lie in (0, 1]")
        self.measure = measure
        self.eps = float(eps)
        self.total_rate = measure.resampling_mass_above(self.eps)
        self._atoms = tuple((z, w / z**2) for z, w in measure.atoms() if z >= self.eps)
        self._atom_rate = sum(w for _, w in self._atoms)
        self._grid = None
        if measure.has_continuous_part and self.total_rate > self._atom_rate + 0.0:
            self._build_grid()

    def _build_grid(self) -> None:
        # Piecewise-linear inverse CDF of the continuous part on a log-spaced
        # grid; resolution well below any Monte Carlo noise floor used here.
        nodes = np.exp(np.linspace(math.log(self.eps), 0.0, 8193))
        nodes[-1] = 1.0
        dens = self.measure.density(nodes) / nodes**2
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(nodes))])
        if cdf[-1] <= 0:
            self._grid = None
            return
        cdf /= cdf[-1]
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        self._grid = (cdf[keep], nodes[keep])

    @property
    def truncated_mass(self) -> float:
        """Plain mass ``L([0, eps))`` lost to the truncation (diagnostic)."""
        return self.measure.total_mass() - self.measure.mass_above(self.eps)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.total_rate <= 0:
            raise ValueError("cannot sample from an empty size law")
        if size == 0:
            return np.empty(0)
        cont_rate = self.total_rate - self._atom_rate
        if self._atoms and cont_rate <= 0:
            return self._sample_atoms(rng, size)
        if not self._atoms:
            return self._sample_continuous(rng, size)
        pick_atom = rng.random(size) < self._atom_rate / self.total_rate
        out = np.empty(size)
        n_atom = int(pick_atom.sum())
        if n_atom:
            out[pick_atom] = self._sample_atoms(rng, n_atom)
        if n_atom < size:
            out[~pick_atom] = self._sample_continuous(rng, size - n_atom)
        return out

    def _sample_atoms(self, rng, size):
        zs = np.array([z for z, _ in self._atoms])
        ws = np.array([w for _, w in self._atoms])
        idx = rng.choice(len(zs), size=size, p=ws / ws.sum())
        return zs[idx]

    def _sample_continuous(self, rng, size):
        if isinstance(self.measure, UniformLaw):
            # density mass/z**2 on [eps, 1]: exact inverse CDF
            u = rng.random(size)
            inv_eps = 1.0 / self.eps
            return 1.0 / (inv_eps - u * (inv_eps - 1.0))
        if isinstance(self.measure, BetaLaw) and self.measure.a > 2.0:
            # L(dz)/z**2 is a Beta(a-2, b) shape; rejection below eps
            out = np.empty(size)
            filled = 0
            while filled < size:
                cand = rng.beta(self.measure.a - 2.0, self.measure.b, size=size - filled)
                good = cand >= self.eps
                n = int(good.sum())
                out[filled : filled + n] = cand[good]
                filled += n
            return out
        if self._grid is None:
            raise ValueError("size law has no continuous mass above the truncation")
        cdf, nodes = self._grid
        return np.interp(rng.random(size), cdf, nodes)
