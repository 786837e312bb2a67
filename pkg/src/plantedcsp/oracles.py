"""Simulated statistical oracles over planted and uniform sample sources.

Queries are vectorised: a :class:`QueryFunction` maps a batch of samples (a
:class:`Formula` of clauses or :class:`LabeledTuples`) to an integer array.
Every sample drawn by a session is charged to ``samples_consumed`` and shows up
in the transcript, so totals can be audited afterwards.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .clause_space import Formula, TupleIndexer, count_tuples, enumerate_clauses
from .planting import (
    LabeledTuples,
    PlantedModel,
    sample_formula,
    sample_goldreich_batch,
    sample_uniform_formula,
    sample_uniform_labeled,
)

ENUM_LIMIT = 1_000_000
# Honest VSTAT/MVSTAT draw this many times t samples.  With exactly t samples
# the band is one standard deviation wide and holds only about 68% of the
# time; 16 t samples put it at four standard deviations.
DEFAULT_OVERSAMPLE = 16
TRANSCRIPT_FIELDS = ("query_id", "kind", "L", "t", "cost", "samples", "answer_digest")


class BudgetExhausted(RuntimeError):
    pass


class ExactExpectationUnavailable(RuntimeError):
    """The source is too large to enumerate, so exact expectations are unknown."""


def tolerance(p: float, t: int) -> float:
    """VSTAT(t) tolerance ``max(1/t, sqrt(p(1-p)/t))``."""
    p = min(max(float(p), 0.0), 1.0)
    return max(1.0 / t, math.sqrt(p * (1.0 - p) / t))


@dataclass(frozen=True)
class QueryFunction:
    """A query ``h`` with range ``{0, ..., L-1}``.

    ``key`` identifies the query for answer caching; leave it ``None`` for
    queries that should never be cached.
    """

    L: int
    eval: Callable[[object], np.ndarray]
    key: str | None = None

    def __post_init__(self) -> None:
        if self.L < 2:
            raise ValueError("a query needs at least two values")

    def __call__(self, samples) -> np.ndarray:
        out = np.asarray(self.eval(samples), dtype=np.int64)
        if out.size and (out.min() < 0 or out.max() >= self.L):
            raise ValueError(f"query value outside [0, {self.L})")
        return out

    def indicator(self, value: int) -> QueryFunction:
        key = None if self.key is None else f"{self.key}=={value}"
        return QueryFunction(2, lambda s, v=value: (self(s) == v).astype(np.int64), key)


@dataclass(frozen=True)
class SubsetSpec:
    sets: tuple[frozenset[int], ...]

    def __init__(self, sets: Sequence[Sequence[int]]):
        frozen = tuple(frozenset(int(v) for v in s) for s in sets)
        if not frozen:
            raise ValueError("subset spec is empty")
        if any(len(s) == 0 for s in frozen):
            raise ValueError("subsets must be nonempty")
        object.__setattr__(self, "sets", frozen)

    @classmethod
    def singletons(cls, L: int) -> SubsetSpec:
        return cls([[i] for i in range(L)])

    def __len__(self) -> int:
        return len(self.sets)

    def masses(self, vector: np.ndarray) -> np.ndarray:
        vector = np.asarray(vector, dtype=float)
        return np.array([vector[sorted(z)].sum() for z in self.sets])


def mvstat_violations(answer: np.ndarray, exact: np.ndarray, spec: SubsetSpec, t: int) -> list[int]:
    """Indices of subsets whose answered mass misses the MVSTAT(L, t) band."""
    got = spec.masses(answer)
    want = spec.masses(exact)
    return [i for i, (g, p) in enumerate(zip(got, want)) if abs(g - p) > tolerance(p, t) + 1e-12]


@dataclass(frozen=True)
class UniformSource:
    """Uniform clauses over ``X_k`` (or uniformly labeled tuples when ``labeled``)."""

    n: int
    k: int
    labeled: bool = False


def draw(source, count: int, rng: np.random.Generator):
    """``count`` fresh samples from a planted or uniform source."""
    if isinstance(source, UniformSource):
        if source.labeled:
            return sample_uniform_labeled(source.n, source.k, count, rng)
        return sample_uniform_formula(source.n, source.k, count, rng)
    if source.is_predicate:
        return sample_goldreich_batch(source, count, rng)
    return sample_formula(source, count, rng)


def exact_distribution(source, limit: int = ENUM_LIMIT):
    """Enumerated sample domain together with each element's probability."""
    n, k = source.n, source.k
    labeled = source.labeled if isinstance(source, UniformSource) else source.is_predicate
    if not labeled:
        if count_tuples(n, k) > limit:
            raise ExactExpectationUnavailable(f"|X_{k}| exceeds {limit}")
        domain = enumerate_clauses(n, k, limit)
        if isinstance(source, UniformSource):
            return domain, np.full(len(domain), 1.0 / len(domain))
        raw = source.source.weights[domain.pattern_codes(source.sigma)]
        return domain, raw / raw.sum()
    size = count_tuples(n, k, signed=False)
    if 2 * size > limit:
        raise ExactExpectationUnavailable(f"|Y_{k}| exceeds {limit}")
    ix = TupleIndexer(n, k, signed=False)
    variables, _ = ix.unindex_arrays(np.arange(size))
    variables = np.vstack([variables, variables])
    labels = np.repeat(np.array([-1, 1], dtype=np.int8), size)
    domain = LabeledTuples(n, k, variables, labels)
    if isinstance(source, UniformSource):
        return domain, np.full(2 * size, 0.5 / size)
    pred = source.source
    codes = ((source.sigma.values[variables] == -1).astype(np.int64) << np.arange(k)).sum(axis=1)
    probs = (pred.signs[codes] == labels).astype(float) / size
    return domain, probs


def _digest(answer) -> str:
    data = np.asarray(answer).tobytes()
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass
class OracleSession:
    """Single-owner oracle simulator.

    ``mode`` is ``"honest"`` (answers computed from fresh samples) or
    ``"adversarial"`` (answers derived from ``reference``, clamped into the
    valid band around the exact expectation under ``source``).
    """

    source: object
    rng: np.random.Generator
    t: int | None = None
    mode: str = "honest"
    reference: object | None = None
    budget: int | None = None
    max_range: int | None = None
    enum_limit: int = ENUM_LIMIT
    oversample: int = DEFAULT_OVERSAMPLE
    samples_consumed: int = 0
    query_cost: int = 0
    query_log: list[dict] = field(default_factory=list)
    _exact: tuple | None = field(default=None, repr=False)
    _ref_exact: tuple | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.mode not in ("honest", "adversarial"):
            raise ValueError(f"unknown oracle mode {self.mode!r}")
        if self.mode == "adversarial" and self.reference is None:
            self.reference = UniformSource(
                self.source.n, self.source.k, labeled=getattr(self.source, "is_predicate", False)
            )

    # -- bookkeeping ---------------------------------------------------------

    def _take(self, count: int):
        if self.budget is not None and self.samples_consumed + count > self.budget:
            raise BudgetExhausted(f"sample budget {self.budget} exhausted")
        samples = draw(self.source, count, self.rng)
        self.samples_consumed += count
        return samples

    def _record(self, kind: str, L: int, t: int | None, cost: int, samples: int, answer, **extra) -> None:
        self.query_cost += cost
        rec = {
            "query_id": len(self.query_log),
            "kind": kind,
            "L": int(L),
            "t": None if t is None else int(t),
            "cost": int(cost),
            "samples": int(samples),
            "answer_digest": _digest(answer),
        }
        rec.update(extra)
        self.query_log.append(rec)

    def _check_range(self, L: int) -> None:
        if self.max_range is not None and L > self.max_range:
            raise ValueError(f"query range {L} exceeds oracle limit {self.max_range}")

    def _require_t(self) -> int:
        if self.t is None:
            raise ValueError("session has no sample-size parameter t")
        return int(self.t)

    def exact(self):
        if self._exact is None:
            self._exact = exact_distribution(self.source, self.enum_limit)
        return self._exact

    def _reference_exact(self):
        if self._ref_exact is None:
            self._ref_exact = exact_distribution(self.reference, self.enum_limit)
        return self._ref_exact

    def expectation(self, h: QueryFunction) -> np.ndarray:
        """Exact distribution of ``h`` under the source (length-L vector)."""
        domain, probs = self.exact()
        return np.bincount(h(domain), weights=probs, minlength=h.L)

    # -- sample oracles ------------------------------------------------------

    def query_1mstat_batch(self, h: QueryFunction, count: int) -> np.ndarray:
        """``count`` independent 1-MSTAT(L) calls, logged as one transcript record."""
        self._check_range(h.L)
        samples = self._take(int(count))
        values = h(samples)
        self._record("1-MSTAT", h.L, None, int(count), int(count), values)
        return values

    def query_1mstat(self, h: QueryFunction) -> int:
        return int(self.query_1mstat_batch(h, 1)[0])

    def query_1stat(self, h: QueryFunction) -> int:
        if h.L != 2:
            raise ValueError("1-STAT queries are boolean")
        value = int(self.query_1mstat_batch(h, 1)[0])
        self.query_log[-1]["kind"] = "1-STAT"
        return value

    # -- expectation oracles -------------------------------------------------

    def query_vstat(self, h: QueryFunction, t: int | None = None) -> float:
        if h.L != 2:
            raise ValueError("VSTAT queries are boolean")
        t = int(t) if t is not None else self._require_t()
        if self.mode == "adversarial":
            if h.key is not None and ("VSTAT", h.key, t) in self._cache:
                v = self._cache[("VSTAT", h.key, t)]
                self._record("VSTAT", 2, t, 1, 0, np.float64(v), cached=True)
                return v
            p = float(self.expectation(h)[1])
            domain, probs = self._reference_exact()
            ref = float(np.dot(h(domain), probs))
            tau = tolerance(p, t)
            v = min(max(ref, p - tau), p + tau)
            if h.key is not None:
                self._cache[("VSTAT", h.key, t)] = v
            self._record("VSTAT", 2, t, 1, 0, np.float64(v), p=p, tau=tau)
            return v
        size = self.oversample * t
        raw = float(h(self._take(size)).mean())
        try:
            p = float(self.expectation(h)[1])
        except ExactExpectationUnavailable:
            self._record("VSTAT", 2, t, 1, size, np.float64(raw), raw=raw, tau=tolerance(raw, t))
            return raw
        tau = tolerance(p, t)
        v = min(max(raw, p - tau), p + tau)
        self._record("VSTAT", 2, t, 1, size, np.float64(v), raw=raw, p=p, tau=tau)
        return v

    def query_mvstat(self, h: QueryFunction, spec: SubsetSpec, t: int | None = None) -> np.ndarray:
        t = int(t) if t is not None else self._require_t()
        self._check_range(h.L)
        if any(max(z) >= h.L or min(z) < 0 for z in spec.sets):
            raise ValueError("subset mentions a value outside the query range")
        if self.mode == "adversarial":
            exact = self.expectation(h)
            domain, probs = self._reference_exact()
            ref = np.bincount(h(domain), weights=probs, minlength=h.L)
            answer = ref if not mvstat_violations(ref, exact, spec, t) else exact
            self._record("MVSTAT", h.L, t, len(spec), 0, answer)
            return answer
        size = self.oversample * t
        answer = np.bincount(h(self._take(size)), minlength=h.L) / size
        self._record("MVSTAT", h.L, t, len(spec), size, answer)
        return answer

    # -- transcript ----------------------------------------------------------

    def transcript_lines(self) -> list[str]:
        return [json.dumps({f: rec[f] for f in TRANSCRIPT_FIELDS}, sort_keys=True) for rec in self.query_log]

    def export_transcript(self, path: str | Path) -> None:
        Path(path).write_text("".join(line + "\n" for line in self.transcript_lines()), encoding="ascii")

    def transcript_samples(self) -> int:
        return sum(rec["samples"] for rec in self.query_log)


# ---------------------------------------------------------------------------
# reductions between oracles


def reduce_mvstat_to_vstat(
    h: QueryFunction,
    spec: SubsetSpec,
    vstat_backend: Callable[[QueryFunction, int], float],
    t: int,
) -> np.ndarray:
    """Answer an MVSTAT(L, t) query with L indicator queries to VSTAT(4 L t).

    ``spec`` is accepted for interface parity; the indicator answers do not
    depend on which subsets were requested.
    """
    del spec
    t_inner = 4 * h.L * int(t)
    return np.array([vstat_backend(h.indicator(i), t_inner) for i in range(h.L)], dtype=float)


def simulate_1mstat_via_1stat(
    h: QueryFunction,
    onestat_backend: Callable[[QueryFunction], int],
    rng: np.random.Generator,
) -> int | None:
    """One draw of the coin construction; returns a value in ``[0, L)`` or ``None`` for bottom.

    Each indicator ``h_i`` is sampled once through 1-STAT and kept with
    probability 1/2.  Exactly one surviving 1 names the candidate ``j``;
    a second 1-STAT sample of ``h_j``, again kept with probability 1/2, must
    then come up 0.  Conditioned on success the output has the law of ``h``.
    """
    ones = []
    for i in range(h.L):
        b = onestat_backend(h.indicator(i)) and rng.random() < 0.5
        if b:
            ones.append(i)
    if len(ones) != 1:
        return None
    j = ones[0]
    confirm = onestat_backend(h.indicator(j)) and rng.random() < 0.5
    return None if confirm else j
