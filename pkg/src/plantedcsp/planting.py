"""Clause distributions, their Fourier analysis, and planted samplers.

A clause distribution Q is a probability table over sign patterns
``y in {-1,+1}^k``.  Tables are indexed by the pattern code: bit ``i`` of the
index is set when literal ``i`` is TRUE (``y_i = -1``).  With that ordering the
Walsh basis function for a position set ``S`` (also a bitmask) is
``(-1) ** popcount(code & S)``, so the Fourier table is a plain
Walsh-Hadamard transform divided by ``2**k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .clause_space import (
    MAX_ARITY,
    Assignment,
    Clause,
    Formula,
    Literal,
    TupleIndexer,
    code_to_pattern,
    random_distinct_variables,
)

ZERO_TOL = 1e-9
SUM_TOL = 1e-9


class UniformDistributionError(ValueError):
    """Raised when a distribution has no nonzero nonempty Fourier coefficient."""


def popcount(x: np.ndarray | int) -> np.ndarray | int:
    if isinstance(x, (int, np.integer)):
        return bin(int(x)).count("1")
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x = x >> 1
    return out


def walsh_hadamard(values: np.ndarray) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform along the last axis."""
    a = np.array(values, dtype=float)
    size = a.shape[-1]
    if size & (size - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < size:
        a = a.reshape(*a.shape[:-1], size // (2 * h), 2, h)
        lo = a[..., 0, :].copy()
        hi = a[..., 1, :]
        a[..., 0, :] = lo + hi
        a[..., 1, :] = lo - hi
        a = a.reshape(*a.shape[:-3], size)
        h *= 2
    return a


def positions_to_mask(positions: Iterable[int]) -> int:
    mask = 0
    for i in positions:
        if i < 0:
            raise ValueError("positions are 0-based and nonnegative")
        mask |= 1 << i
    return mask


def mask_to_positions(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if (mask >> i) & 1)


def _check_arity(k: int) -> None:
    if not 1 <= k <= MAX_ARITY:
        raise ValueError(f"arity must be in [1, {MAX_ARITY}], got {k}")


@dataclass(frozen=True, eq=False)
class ClauseDistribution:
    """Validated distribution Q over sign patterns, with cached Fourier table."""

    k: int
    weights: np.ndarray
    fourier: np.ndarray = field(repr=False)
    zero_tol: float = ZERO_TOL
    name: str = ""

    def coefficient(self, positions: Iterable[int]) -> float:
        return float(self.fourier[positions_to_mask(positions)])

    def weight(self, pattern: Sequence[int]) -> float:
        code = sum(1 << i for i, y in enumerate(pattern) if y == -1)
        return float(self.weights[code])

    def negate(self) -> ClauseDistribution:
        """Q composed with global negation of the pattern."""
        full = (1 << self.k) - 1
        idx = np.arange(1 << self.k) ^ full
        return validate_distribution(self.weights[idx], zero_tol=self.zero_tol)

    def marginal(self, positions: Sequence[int]) -> np.ndarray:
        """Exact marginal table of the sub-pattern at ``positions``."""
        codes = np.arange(1 << self.k)
        sub = np.zeros_like(codes)
        for j, pos in enumerate(positions):
            sub |= ((codes >> pos) & 1) << j
        return np.bincount(sub, weights=self.weights, minlength=1 << len(positions))

    def is_uniform(self) -> bool:
        return bool(np.all(np.abs(self.fourier[1:]) <= self.zero_tol))

    def to_json(self) -> dict:
        return {"k": self.k, "table": [float(w) for w in self.weights]}


def validate_distribution(
    weights: Sequence[float] | np.ndarray, zero_tol: float = ZERO_TOL, name: str = ""
) -> ClauseDistribution:
    w = np.array(weights, dtype=float).reshape(-1)
    size = w.size
    if size < 2 or size & (size - 1):
        raise ValueError(f"table length {size} is not 2**k for k >= 1")
    k = size.bit_length() - 1
    _check_arity(k)
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = float(w.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"weights sum to {total!r}, not 1")
    w.setflags(write=False)
    f = walsh_hadamard(w) / size
    f.setflags(write=False)
    return ClauseDistribution(k=k, weights=w, fourier=f, zero_tol=zero_tol, name=name)


def symmetric_to_full(per_true_count: Sequence[float], name: str = "") -> ClauseDistribution:
    """Expand a table indexed by the number of TRUE literals to all patterns.

    Entries are per-pattern values, so normalisation requires
    ``sum_j C(k, j) * q[j] == 1``.
    """
    q = np.array(per_true_count, dtype=float)
    k = q.size - 1
    _check_arity(k)
    if np.any(q < 0):
        raise ValueError("weights must be nonnegative")
    total = sum(math.comb(k, j) * q[j] for j in range(k + 1))
    if abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"symmetric table normalises to {total!r}, not 1")
    codes = np.arange(1 << k)
    return validate_distribution(q[popcount(codes)], name=name)


def fourier_coefficient(q: ClauseDistribution, positions: Iterable[int]) -> float:
    """Direct evaluation of (1/2^k) sum_y Q(y) prod_{i in S} y_i."""
    pos = list(positions)
    if any(p < 0 or p >= q.k for p in pos):
        raise ValueError("position outside [0, k)")
    total = 0.0
    for code in range(1 << q.k):
        y = code_to_pattern(code, q.k)
        total += q.weights[code] * float(np.prod(y[pos])) if pos else q.weights[code]
    return total / (1 << q.k)


@dataclass(frozen=True, eq=False)
class Predicate:
    """Boolean predicate on {-1,+1}^k stored as a 0/1 table in pattern order.

    Goldreich labels are ``(-1) ** P(y)``: -1 when the predicate holds, in
    keeping with -1 meaning TRUE.
    """

    k: int
    bits: np.ndarray
    name: str = ""
    zero_tol: float = ZERO_TOL

    def __post_init__(self) -> None:
        b = np.array(self.bits, dtype=np.int8).reshape(-1)
        if b.size != 1 << self.k:
            raise ValueError("predicate table must have 2**k entries")
        _check_arity(self.k)
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("predicate entries must be 0 or 1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def signs(self) -> np.ndarray:
        return 1 - 2 * self.bits.astype(np.int64)

    @property
    def fourier(self) -> np.ndarray:
        """Fourier table of the +-1 valued label function."""
        return walsh_hadamard(self.signs) / (1 << self.k)

    @property
    def fourier01(self) -> np.ndarray:
        return walsh_hadamard(self.bits) / (1 << self.k)

    def to_json(self) -> dict:
        return {"k": self.k, "predicate": [int(b) for b in self.bits]}


Source = Union[ClauseDistribution, Predicate]


@dataclass(frozen=True)
class ComplexityCertificate:
    r: int
    witness: tuple[int, ...]
    coefficient: float
    magnitude: float
    k: int


def distribution_complexity(source: Source, zero_tol: float | None = None) -> ComplexityCertificate:
    """Smallest r >= 1 with a nonzero Fourier coefficient on an r-set.

    The witness is the r-set of largest coefficient magnitude, ties broken by
    lexicographic order of the sorted positions.
    """
    tol = source.zero_tol if zero_tol is None else zero_tol
    fourier = source.fourier
    k = source.k
    for r in range(1, k + 1):
        best = None
        for pos in combinations(range(k), r):
            c = float(fourier[positions_to_mask(pos)])
            if abs(c) > tol and (best is None or abs(c) > abs(best[1]) + tol):
                best = (pos, c)
        if best is not None:
            return ComplexityCertificate(r=r, witness=best[0], coefficient=best[1], magnitude=abs(best[1]), k=k)
    raise UniformDistributionError("distribution is uniform: every nonempty Fourier coefficient vanishes")


@dataclass(frozen=True)
class ParityChannel:
    """Parity distribution on r-clauses induced by keeping the witness positions.

    ``delta`` weighs patterns with an even number of FALSE literals:
    ``Q^delta(z) = delta / 2^r`` for those and ``(2 - delta) / 2^r`` otherwise.
    """

    k: int
    r: int
    delta: float
    positions: tuple[int, ...]

    @property
    def even_true_factor(self) -> float:
        """Weight factor (relative to uniform) of patterns with an even TRUE count."""
        return self.delta if self.r % 2 == 0 else 2.0 - self.delta

    def table(self) -> np.ndarray:
        codes = np.arange(1 << self.r)
        n_false = self.r - popcount(codes)
        return np.where(n_false % 2 == 0, self.delta, 2.0 - self.delta) / (1 << self.r)

    def apply(self, formula: Formula) -> Formula:
        if formula.k != self.k:
            raise ValueError(f"channel expects {self.k}-clauses, got {formula.k}")
        return formula.restrict(self.positions)


def subsample_to_parity(q: ClauseDistribution, cert: ComplexityCertificate) -> ParityChannel:
    if abs(cert.coefficient) <= q.zero_tol:
        raise ValueError("witness coefficient is zero; channel would carry no signal")
    coef = float(q.fourier[positions_to_mask(cert.witness)])
    r = len(cert.witness)
    delta = 1.0 + (-1) ** r * (1 << q.k) * coef
    channel = ParityChannel(k=q.k, r=r, delta=delta, positions=tuple(cert.witness))
    gap = np.max(np.abs(q.marginal(cert.witness) - channel.table()))
    if gap > 1e-9:
        raise ValueError(f"marginal on witness is not a parity table (gap {gap:.3g}); witness not minimal")
    return channel


def predicate_channel(pred: Predicate, cert: ComplexityCertificate) -> ParityChannel:
    """Parity channel produced by :func:`labeled_to_parity_clauses`."""
    mu = float(pred.fourier[0])
    coef = float(pred.fourier[positions_to_mask(cert.witness)])
    r = len(cert.witness)
    delta = 1.0 + (-1) ** r * abs(coef) / (1.0 + abs(mu))
    return ParityChannel(k=pred.k, r=r, delta=delta, positions=tuple(cert.witness))


@dataclass(frozen=True, eq=False)
class PlantedModel:
    source: Source
    sigma: Assignment

    def __post_init__(self) -> None:
        if self.sigma.n < self.source.k:
            raise ValueError(f"need n >= k, got n={self.sigma.n}, k={self.source.k}")

    @property
    def n(self) -> int:
        return self.sigma.n

    @property
    def k(self) -> int:
        return self.source.k

    @property
    def is_predicate(self) -> bool:
        return isinstance(self.source, Predicate)

    def with_sigma(self, sigma: Assignment) -> PlantedModel:
        return PlantedModel(self.source, sigma)


def _clauses_with_patterns(sigma: Assignment, codes: np.ndarray, k: int, rng: np.random.Generator) -> Formula:
    n = sigma.n
    variables = random_distinct_variables(n, k, codes.size, rng)
    true_bits = ((codes[:, None] >> np.arange(k)) & 1).astype(bool)
    var_true = sigma.values[variables] == -1
    # literal is TRUE iff variable TRUE xor negated
    negated = true_bits ^ var_true
    return Formula(n, k, variables, negated)


def sample_formula(model: PlantedModel, m: int, rng: np.random.Generator) -> Formula:
    """m i.i.d. clauses from Q_sigma: draw a pattern from Q, then a clause with it.

    Every pattern is realised by the same number of ordered clauses, so this
    two-stage draw is exact.
    """
    if model.is_predicate:
        raise TypeError("predicate models emit labeled tuples; use sample_goldreich")
    q = model.source
    codes = rng.choice(1 << q.k, size=int(m), p=q.weights)
    return _clauses_with_patterns(model.sigma, np.asarray(codes, dtype=np.int64), q.k, rng)


def sample_planted_clause(model: PlantedModel, rng: np.random.Generator) -> Clause:
    return sample_formula(model, 1, rng).clause(0)


def sample_uniform_formula(n: int, k: int, m: int, rng: np.random.Generator) -> Formula:
    variables = random_distinct_variables(n, k, int(m), rng)
    negated = rng.integers(0, 2, size=(int(m), k)).astype(bool)
    return Formula(n, k, variables, negated)


def sample_uniform_clause(n: int, k: int, rng: np.random.Generator) -> Clause:
    return sample_uniform_formula(n, k, 1, rng).clause(0)


def sample_channel_formula(channel: ParityChannel, sigma: Assignment, m: int, rng: np.random.Generator) -> Formula:
    """m i.i.d. r-clauses straight from the parity distribution Q^delta_sigma."""
    codes = rng.choice(1 << channel.r, size=int(m), p=channel.table())
    return _clauses_with_patterns(sigma, np.asarray(codes, dtype=np.int64), channel.r, rng)


@dataclass
class LabeledTuples:
    """Goldreich samples: variable tuples (0-based) with +-1 labels."""

    n: int
    k: int
    variables: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.variables.shape[0])

    def __getitem__(self, sl: slice) -> LabeledTuples:
        return LabeledTuples(self.n, self.k, self.variables[sl], self.labels[sl])


def sample_goldreich_batch(model: PlantedModel, m: int, rng: np.random.Generator) -> LabeledTuples:
    if not model.is_predicate:
        raise TypeError("Goldreich sampling needs a predicate model")
    pred = model.source
    variables = random_distinct_variables(model.n, pred.k, int(m), rng)
    codes = ((model.sigma.values[variables] == -1).astype(np.int64) << np.arange(pred.k)).sum(axis=1)
    labels = pred.signs[codes].astype(np.int8)
    return LabeledTuples(model.n, pred.k, variables, labels)


def sample_goldreich(model: PlantedModel, rng: np.random.Generator) -> tuple[tuple[int, ...], int]:
    """One labeled tuple: 1-based variables and the +-1 label."""
    batch = sample_goldreich_batch(model, 1, rng)
    return tuple(int(v) + 1 for v in batch.variables[0]), int(batch.labels[0])


def sample_uniform_labeled(n: int, k: int, m: int, rng: np.random.Generator) -> LabeledTuples:
    variables = random_distinct_variables(n, k, int(m), rng)
    labels = rng.choice(np.array([-1, 1], dtype=np.int8), size=int(m))
    return LabeledTuples(n, k, variables, labels)


def labeled_to_parity_clauses(
    pred: Predicate,
    cert: ComplexityCertificate,
    samples: LabeledTuples,
    rng: np.random.Generator,
) -> Formula:
    """Turn labeled tuples into r-clauses whose law is the parity channel.

    Each sample keeps its witness variables, draws uniform negations, and is
    accepted with probability ``(1 + c (b - mu) chi(negations)) / 2``.  The
    accepted clauses follow :func:`predicate_channel` up to the finite-n
    imbalance of sigma on the discarded positions.
    """
    mu = float(pred.fourier[0])
    coef = float(pred.fourier[positions_to_mask(cert.witness)])
    c = math.copysign(1.0 / (1.0 + abs(mu)), coef)
    pos = list(cert.witness)
    m = len(samples)
    variables = samples.variables[:, pos]
    negated = rng.integers(0, 2, size=(m, len(pos))).astype(bool)
    chi = 1 - 2 * (negated.sum(axis=1) % 2)
    accept = rng.random(m) < (1.0 + c * (samples.labels - mu) * chi) / 2.0
    return Formula(samples.n, len(pos), variables[accept], negated[accept])


def sample_bernoulli_formula(
    channel: ParityChannel,
    sigma: Assignment,
    p: float,
    rng: np.random.Generator,
    chunk: int = 1 << 18,
) -> Formula:
    """Each r-clause enters independently with probability ``p * 2^r * Q^delta``.

    X_r is streamed in index chunks and never held in memory at once.
    """
    top = p * max(channel.delta, 2.0 - channel.delta)
    if p < 0 or top > 1.0:
        raise ValueError(f"inclusion probabilities out of [0, 1] (p={p}, delta={channel.delta})")
    indexer = TupleIndexer(sigma.n, channel.r)
    probs = channel.table() * (1 << channel.r) * p
    parts = []
    for start in range(0, indexer.size, chunk):
        idx = np.arange(start, min(start + chunk, indexer.size))
        variables, negated = indexer.unindex_arrays(idx)
        f = Formula(sigma.n, channel.r, variables, negated)
        keep = rng.random(idx.size) < probs[f.pattern_codes(sigma)]
        parts.append(f[keep])
    if not parts:
        return Formula.empty(sigma.n, channel.r)
    return Formula.concat(parts)


def qsigma_table(q: ClauseDistribution, sigma: Assignment, limit: int = 10_000_000) -> tuple[Formula, np.ndarray]:
    """All clauses of X_k with their exact Q_sigma probabilities."""
    from .clause_space import enumerate_clauses

    domain = enumerate_clauses(sigma.n, q.k, limit)
    raw = q.weights[domain.pattern_codes(sigma)]
    return domain, raw / raw.sum()


# ---------------------------------------------------------------------------
# named sources


def planted_ksat(k: int) -> ClauseDistribution:
    return symmetric_to_full([0.0] + [1.0 / (2**k - 1)] * k, name=f"planted-{k}sat")


def kxor(k: int) -> ClauseDistribution:
    return symmetric_to_full([1.0 / 2 ** (k - 1) if j % 2 else 0.0 for j in range(k + 1)], name=f"{k}xor")


def noisy_parity(delta: float) -> ClauseDistribution:
    """Noisy 3-parity: patterns with even TRUE count weigh delta/8, odd (2-delta)/8."""
    if not 0.0 <= delta <= 2.0:
        raise ValueError("delta must lie in [0, 2]")
    return symmetric_to_full([delta / 8, (2 - delta) / 8, delta / 8, (2 - delta) / 8], name=f"noisy-parity-{delta:g}")


def quiet_4sat() -> ClauseDistribution:
    return symmetric_to_full([0.0, 3 / 32, 1 / 16, 1 / 32, 1 / 8], name="quiet-4sat")


def nae_ksat(k: int) -> ClauseDistribution:
    """Not-all-equal k-SAT: uniform over patterns with at least one TRUE and one FALSE."""
    q = [0.0] + [1.0 / (2**k - 2)] * (k - 1) + [0.0]
    return symmetric_to_full(q, name=f"nae-{k}sat")


def uniform_distribution(k: int) -> ClauseDistribution:
    return validate_distribution(np.full(1 << k, 1.0 / (1 << k)), name=f"uniform-{k}")


def parity_predicate(k: int) -> Predicate:
    codes = np.arange(1 << k)
    return Predicate(k=k, bits=popcount(codes) % 2, name=f"parity-{k}")


BUILTIN_MODELS = {
    "planted-3sat": lambda: planted_ksat(3),
    "planted-4sat": lambda: planted_ksat(4),
    "3xor": lambda: kxor(3),
    "4xor": lambda: kxor(4),
    "5xor": lambda: kxor(5),
    "2xor": lambda: kxor(2),
    "noisy-parity": lambda: noisy_parity(0.5),
    "quiet-4sat": quiet_4sat,
    "nae-3sat": lambda: nae_ksat(3),
    "nae-4sat": lambda: nae_ksat(4),
    "parity-2": lambda: parity_predicate(2),
    "parity-3": lambda: parity_predicate(3),
}


def model_from_config(doc: dict) -> Source:
    """Parse a model document with exactly one of table / symmetric / predicate."""
    if "k" not in doc:
        raise ValueError("model config needs 'k'")
    k = int(doc["k"])
    _check_arity(k)
    present = [key for key in ("table", "symmetric", "predicate") if key in doc]
    if len(present) != 1:
        raise ValueError(f"model config needs exactly one of table/symmetric/predicate, got {present}")
    key = present[0]
    values = doc[key]
    name = str(doc.get("name", ""))
    if key == "symmetric":
        if len(values) != k + 1:
            raise ValueError(f"symmetric table needs k+1 = {k + 1} entries")
        return symmetric_to_full(values, name=name)
    if len(values) != 1 << k:
        raise ValueError(f"{key} table needs 2**k = {1 << k} entries")
    if key == "table":
        return validate_distribution(values, name=name)
    return Predicate(k=k, bits=np.asarray(values), name=name)


def load_model(ref: str | Path) -> Source:
    """Load a model from a JSON file, or by builtin name."""
    ref = str(ref)
    if ref in BUILTIN_MODELS:
        return BUILTIN_MODELS[ref]()
    with open(ref) as fh:
        return model_from_config(json.load(fh))


def literal_tuple(variables: Sequence[int], negated: Sequence[bool]) -> tuple[Literal, ...]:
    return tuple(Literal(int(v) + 1, bool(s)) for v, s in zip(variables, negated))
