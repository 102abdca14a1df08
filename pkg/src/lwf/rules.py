"""Colouring rules: how an offspring picks its type from sampled parents.

A rule maps the multiset of potential-parent types (a count vector over the
K types) to a probability distribution over the offspring's type.  All
built-in rules are exchangeable, so counts are a sufficient statistic for
the ordered sample.  Rules are immutable and all methods are pure; the
``*_batch`` variants vectorize over many samples at once for the replicate
engines.
"""

from __future__ import annotations

import numpy as np

from .bernstein import PolynomialMap, bernstein_table
from .combinat import compositions, composition_index, multinomial_coefficients
from .core import OffspringLaw
from .errors import ConfigError

# Exact enumeration of samples of size k over K types is used while the
# number of multi-indices C(K+k-1, k) stays small.
DEFAULT_K_MAX = 12
_ENUM_LIMIT = 20_000


def _onehot_rows(idx: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros((idx.size, K))
    out[np.arange(idx.size), idx] = 1.0
    return out


class ColouringRule:
    """Base class; subclasses define ``distribution_batch``."""

    kind: str = ""
    mutation_free: bool = True

    def __init__(self, K: int):
        if K < 2:
            raise ValueError(f"need at least two types, got K={K}")
        self.K = int(K)
        self._tables: dict[int, np.ndarray] = {}

    # -- sample -> type law --------------------------------------------------

    def distribution(self, counts) -> np.ndarray:
        """Distribution of the offspring type given one sampled multiset."""
        counts = self._check_counts(np.asarray(counts))
        return self.distribution_batch(counts[None, :])[0]

    def distribution_batch(self, counts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_counts(self, counts: np.ndarray) -> np.ndarray:
        if counts.ndim != 1 or counts.size != self.K:
            raise ValueError(f"counts must have length {self.K}, got shape {counts.shape}")
        if np.any(counts < 0) or not np.issubdtype(counts.dtype, np.integer):
            counts = counts.astype(np.int64)
            if np.any(counts < 0):
                raise ValueError("counts must be nonnegative integers")
        if counts.sum() < 1:
            raise ValueError("sample must contain at least one potential parent")
        return counts

    # -- exact averaging over multinomial samples ----------------------------

    def _table(self, k: int) -> np.ndarray:
        """Rule outputs on every multi-index of size k (cached)."""
        table = self._tables.get(k)
        if table is None:
            table = self.distribution_batch(np.asarray(compositions(self.K, k)))
            table.flags.writeable = False
            self._tables[k] = table
        return table

    def type_law(self, k: int, x) -> np.ndarray:
        """Exact offspring-type law when k parents are sampled at frequencies x."""
        return self.type_law_batch(k, np.asarray(x, dtype=float)[None, :])[0]

    def type_law_batch(self, k: int, X: np.ndarray) -> np.ndarray:
        Z = compositions(self.K, k)
        pmf = multinomial_coefficients(self.K, k) * np.prod(X[:, None, :] ** Z[None, :, :], axis=-1)
        law = pmf @ self._table(k)
        return law / law.sum(axis=1, keepdims=True)

    def supports_enumeration(self, k: int) -> bool:
        from math import comb

        return comb(self.K + k - 1, k) <= _ENUM_LIMIT

    def to_config(self) -> dict:
        raise NotImplementedError


class NeutralRule(ColouringRule):
    """Pick one of the sampled parents uniformly: no selection at all."""

    kind = "neutral"

    def distribution_batch(self, counts):
        counts = np.asarray(counts, dtype=float)
        return counts / counts.sum(axis=1, keepdims=True)

    def type_law_batch(self, k, X):
        # Uniform choice among iid parents leaves the type law at X exactly.
        return np.array(X, dtype=float)

    def to_config(self):
        return {"kind": "neutral"}


def _highest_present(counts: np.ndarray) -> np.ndarray:
    return np.where(counts > 0, np.arange(counts.shape[1]), -1).max(axis=1)


class TransitiveRule(ColouringRule):
    """The highest-labelled type in the sample wins."""

    kind = "transitive"

    def distribution_batch(self, counts):
        counts = np.asarray(counts)
        return _onehot_rows(_highest_present(counts), self.K)

    def to_config(self):
        return {"kind": "transitive"}


class TransitiveWithMutationRule(ColouringRule):
    """Highest label wins, then the offspring mutates with some probability.

    ``kernel[i, j]`` is the probability that a type-i winner yields a type-j
    offspring given that a mutation happens.  Mutation applies to every
    sample size, singletons included.
    """

    kind = "transitive_mutation"

    def __init__(self, K: int, mutation_prob: float, kernel):
        super().__init__(K)
        if not 0.0 <= mutation_prob <= 1.0:
            raise ValueError(f"mutation probability must lie in [0, 1], got {mutation_prob}")
        kernel = np.asarray(kernel, dtype=float)
        if kernel.shape != (K, K):
            raise ValueError(f"kernel must be {K}x{K}")
        if np.any(kernel < 0) or not np.allclose(kernel.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("kernel rows must be probability vectors")
        self.mutation_prob = float(mutation_prob)
        self.kernel = kernel
        self.mutation_free = mutation_prob == 0.0

    def distribution_batch(self, counts):
        counts = np.asarray(counts)
        winner = _highest_present(counts)
        base = _onehot_rows(winner, self.K)
        return (1.0 - self.mutation_prob) * base + self.mutation_prob * self.kernel[winner]

    def to_config(self):
        return {
            "kind": "transitive_mutation",
            "mutation_prob": self.mutation_prob,
            "kernel": self.kernel.tolist(),
        }


class LogisticRule(ColouringRule):
    """Pairwise contests with win probabilities ``p[i, j]``.

    Defined for samples of one or two potential parents (the pairing used to
    realize competitive Lotka-Volterra drifts); larger samples are rejected.
    """

    kind = "logistic"

    def __init__(self, win_probs):
        win_probs = np.asarray(win_probs, dtype=float)
        if win_probs.ndim != 2 or win_probs.shape[0] != win_probs.shape[1]:
            raise ValueError("win-probability matrix must be square")
        K = win_probs.shape[0]
        super().__init__(K)
        if np.any(win_probs < 0) or np.any(win_probs > 1):
            raise ValueError("win probabilities must lie in [0, 1]")
        if not np.allclose(np.diag(win_probs), 0.5, atol=1e-12):
            raise ValueError("diagonal win probabilities must equal 1/2")
        if not np.allclose(win_probs + win_probs.T, 1.0, atol=1e-9):
            raise ValueError("need p[i, j] + p[j, i] = 1")
        self.win_probs = win_probs

    def distribution_batch(self, counts):
        counts = np.asarray(counts)
        totals = counts.sum(axis=1)
        if np.any(totals > 2):
            raise ValueError("logistic rule is defined for samples of at most two parents")
        out = np.zeros((counts.shape[0], self.K), dtype=float)
        arange = np.arange(self.K)
        mono = counts.max(axis=1) == totals  # single parent or a same-type pair
        if mono.any():
            out[mono] = _onehot_rows(counts[mono].argmax(axis=1), self.K)
        mixed = ~mono
        if mixed.any():
            present = counts[mixed] > 0
            i = np.where(present, arange, self.K).min(axis=1)
            j = np.where(present, arange, -1).max(axis=1)
            rows = np.flatnonzero(mixed)
            out[rows, i] = self.win_probs[i, j]
            out[rows, j] = self.win_probs[j, i]
        return out

    def to_config(self):
        return {"kind": "logistic", "matrix": self.win_probs.tolist()}


class PartialOrderRule(ColouringRule):
    """Contest ordered by an antisymmetric "beats" relation.

    The parent is chosen uniformly among sampled parents whose type is not
    beaten by any other type present in the sample; if a cycle leaves no
    such type (possible only for samples of three or more), the choice is
    uniform among all sampled parents.  Pairs of incomparable types thus
    split 1/2 - 1/2.
    """

    kind = "partial_order"

    def __init__(self, K: int, beats):
        super().__init__(K)
        matrix = np.zeros((K, K), dtype=bool)
        for winner, loser in beats:
            w, l = int(winner), int(loser)
            if not (0 <= w < K and 0 <= l < K) or w == l:
                raise ValueError(f"bad beats pair ({winner}, {loser})")
            matrix[w, l] = True
        if np.any(matrix & matrix.T):
            raise ValueError("beats relation must be antisymmetric")
        self.beats = matrix

    @classmethod
    def rps(cls) -> "PartialOrderRule":
        """Three cyclically dominant types: 2 beats 1, 3 beats 2, 1 beats 3."""
        return cls(3, [(1, 0), (2, 1), (0, 2)])

    def distribution_batch(self, counts):
        counts = np.asarray(counts, dtype=float)
        present = counts > 0
        beaten = (present @ self.beats) > 0
        weights = np.where(present & ~beaten, counts, 0.0)
        none_maximal = weights.sum(axis=1) == 0
        if none_maximal.any():
            weights[none_maximal] = counts[none_maximal]
        return weights / weights.sum(axis=1, keepdims=True)

    def to_config(self):
        pairs = [[int(w) + 1, int(l) + 1] for w, l in zip(*np.nonzero(self.beats))]
        return {"kind": "partial_order", "beats": pairs}


class NegFreqDepRule(ColouringRule):
    """Parent chosen among those with the rarest type in the sample."""

    kind = "neg_freq"

    def distribution_batch(self, counts):
        counts = np.asarray(counts)
        masked = np.where(counts > 0, counts, np.iinfo(np.int64).max)
        rarest = masked.min(axis=1, keepdims=True)
        sel = (counts == rarest).astype(float)
        return sel / sel.sum(axis=1, keepdims=True)

    def to_config(self):
        return {"kind": "neg_freq"}


class PosFreqDepRule(ColouringRule):
    """Parent chosen among those with the commonest type in the sample."""

    kind = "pos_freq"

    def distribution_batch(self, counts):
        counts = np.asarray(counts)
        sel = (counts == counts.max(axis=1, keepdims=True)).astype(float)
        return sel / sel.sum(axis=1, keepdims=True)

    def to_config(self):
        return {"kind": "pos_freq"}


class BernsteinRule(ColouringRule):
    """Rule read off a Bernstein coefficient table of degree n.

    Defined for samples of size n (table lookup) and size 1 (the sampled
    parent is the real parent); pair it with an offspring law supported on
    {1, n}.
    """

    kind = "bernstein"

    def __init__(self, degree: int, table: np.ndarray):
        table = np.asarray(table, dtype=float)
        if table.ndim != 2:
            raise ValueError("table must be 2-d")
        K = table.shape[1]
        super().__init__(K)
        self.degree = int(degree)
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        Z = compositions(K, self.degree)
        if table.shape[0] != Z.shape[0]:
            raise ValueError(f"table must have one row per multi-index ({Z.shape[0]}), got {table.shape[0]}")
        rows = table.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > 1e-9)
        if bad.size:
            z = tuple(int(v) for v in Z[bad[0]])
            raise ValueError(f"coefficient row for multi-index {z} sums to {rows[bad[0]]!r}, expected 1")
        self.table = np.clip(table, 0.0, 1.0)
        self.table.flags.writeable = False
        # encode count rows as integers for vectorized table lookup
        self._powers = (self.degree + 1) ** np.arange(K, dtype=np.int64)
        codes = np.asarray(Z) @ self._powers
        order = np.argsort(codes)
        self._codes_sorted = codes[order]
        self._row_of_code = order
        self.mutation_free = bool(np.all(self.table[np.asarray(Z) == 0] == 0.0))

    def offspring_law(self, rho: float) -> OffspringLaw:
        """The sampling law this rule is built for: 1 parent, or n of them."""
        return OffspringLaw(rho, {self.degree: 1.0})

    def distribution_batch(self, counts):
        counts = np.asarray(counts)
        totals = counts.sum(axis=1)
        out = np.zeros((counts.shape[0], self.K))
        single = totals == 1
        if single.any():
            out[single] = _onehot_rows(counts[single].argmax(axis=1), self.K)
        full = totals == self.degree
        if self.degree == 1:
            full &= ~single
        if full.any():
            codes = counts[full] @ self._powers
            rows = self._row_of_code[np.searchsorted(self._codes_sorted, codes)]
            out[full] = self.table[rows]
        other = ~(single | full)
        if other.any():
            raise ValueError(
                f"Bernstein rule of degree {self.degree} got a sample of size {int(totals[other][0])}"
            )
        return out

    def to_config(self):
        Z = compositions(self.K, self.degree)
        entries = [[list(map(int, z)), list(map(float, row))] for z, row in zip(Z, self.table)]
        return {"kind": "bernstein", "degree": self.degree, "table": entries}


def bernstein_rule(g, *, degree: int | None = None, tol: float = 1e-9) -> BernsteinRule:
    """Build the colouring rule realizing a simplex-preserving polynomial map.

    ``g`` is a :class:`~lwf.bernstein.PolynomialMap`, or a pair
    ``(degree, table)`` giving Bernstein coefficients directly.  The map
    must send the simplex face into itself: every Bernstein coefficient must
    land in [0, 1] (the offending multi-index is reported otherwise) and
    each coefficient row must sum to 1.
    """
    if isinstance(g, PolynomialMap):
        n, table = bernstein_table(g, degree)
        K = g.K
    else:
        n, table = g
        table = np.asarray(table, dtype=float)
        K = table.shape[1]
    Z = compositions(K, n)
    bad = np.flatnonzero((table < -tol) | (table > 1.0 + tol))
    if bad.size:
        row, col = np.unravel_index(bad[0], table.shape)
        z = tuple(int(v) for v in Z[row])
        raise ValueError(
            f"Bernstein coefficient for output {col + 1} at multi-index {z} is "
            f"{table[row, col]!r}, outside [0, 1]: the map does not preserve the simplex"
        )
    return BernsteinRule(n, np.clip(table, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def colour_distribution(rule: ColouringRule, counts) -> np.ndarray:
    """Offspring-type distribution for one sampled multiset of parents."""
    return rule.distribution(counts)


class OffspringTypeLaw:
    """Result of :func:`offspring_type_prob`: probabilities with errors."""

    def __init__(self, probs: np.ndarray, stderr: np.ndarray, exact: bool):
        self.probs = probs
        self.stderr = stderr
        self.exact = exact


def offspring_type_prob(
    rule: ColouringRule,
    offspring: OffspringLaw,
    x,
    *,
    k_max: int = DEFAULT_K_MAX,
    mc_samples: int = 10**6,
    rng: np.random.Generator | None = None,
) -> OffspringTypeLaw:
    """Unconditional law of one offspring's type at frequencies ``x``.

    Averages the rule over the sample-size law: exact enumeration for sizes
    up to ``k_max`` (or wherever enumeration stays small), Monte Carlo with
    reported standard errors beyond.
    """
    x = np.asarray(x, dtype=float)
    probs = (1.0 - offspring.rho) * x
    var = np.zeros_like(x)
    exact = True
    for k, p in offspring.tail:
        weight = offspring.rho * p
        if weight == 0.0:
            continue
        if k <= k_max and rule.supports_enumeration(k):
            probs = probs + weight * rule.type_law(k, x)
        else:
            if rng is None:
                raise ValueError(f"sample size {k} needs Monte Carlo: pass an rng")
            exact = False
            draws = rng.multinomial(k, x, size=mc_samples)
            rows = rule.distribution_batch(draws)
            probs = probs + weight * rows.mean(axis=0)
            var = var + (weight * rows.std(axis=0) / np.sqrt(mc_samples)) ** 2
    return OffspringTypeLaw(probs, np.sqrt(var), exact)


_RULE_KINDS = {
    cls.kind: cls
    for cls in (
        NeutralRule,
        TransitiveRule,
        TransitiveWithMutationRule,
        LogisticRule,
        PartialOrderRule,
        NegFreqDepRule,
        PosFreqDepRule,
        BernsteinRule,
    )
}


def rule_from_config(block: dict, K: int) -> ColouringRule:
    """Deserialize a rule block; type labels in configs are 1-based."""
    if not isinstance(block, dict) or "kind" not in block:
        raise ConfigError("rule block must be a mapping with a 'kind' key")
    kind = block["kind"]
    extra = {k: v for k, v in block.items() if k != "kind"}

    def reject_unknown(allowed):
        unknown = set(extra) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown keys in rule block: {sorted(unknown)}")

    try:
        if kind == "neutral":
            reject_unknown(())
            return NeutralRule(K)
        if kind == "transitive":
            reject_unknown(())
            return TransitiveRule(K)
        if kind == "transitive_mutation":
            reject_unknown(("mutation_prob", "kernel"))
            return TransitiveWithMutationRule(K, float(extra["mutation_prob"]), extra["kernel"])
        if kind == "logistic":
            reject_unknown(("matrix",))
            rule = LogisticRule(extra["matrix"])
            if rule.K != K:
                raise ConfigError(f"logistic matrix is {rule.K}x{rule.K} but model has K={K}")
            return rule
        if kind == "partial_order":
            reject_unknown(("beats",))
            pairs = [(int(w) - 1, int(l) - 1) for w, l in extra["beats"]]
            return PartialOrderRule(K, pairs)
        if kind == "neg_freq":
            reject_unknown(())
            return NegFreqDepRule(K)
        if kind == "pos_freq":
            reject_unknown(())
            return PosFreqDepRule(K)
        if kind == "bernstein":
            reject_unknown(("degree", "table"))
            degree = int(extra["degree"])
            idx = composition_index(K, degree)
            table = np.zeros((len(idx), K))
            seen = set()
            for z, row in extra["table"]:
                key = tuple(int(v) for v in z)
                if key not in idx:
                    raise ConfigError(f"multi-index {key} is not a degree-{degree} index over {K} types")
                if key in seen:
                    raise ConfigError(f"duplicate multi-index {key} in Bernstein table")
                seen.add(key)
                table[idx[key]] = row
            if len(seen) != len(idx):
                raise ConfigError(f"Bernstein table must cover all {len(idx)} multi-indices, got {len(seen)}")
            return bernstein_rule((degree, table))
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad rule block: {exc}") from exc
    raise ConfigError(f"unknown rule kind {kind!r} (expected one of {sorted(_RULE_KINDS)})")
