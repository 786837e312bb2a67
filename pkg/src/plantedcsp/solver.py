"""Recovery of planted assignments by subsampled discrete power iteration.

The working object is the bipartite matrix M of an r-clause stream: a clause
``(l_1, ..., l_r)`` contributes one entry at row ``index(l_1..l_a)`` and column
``index(l_{a+1}..l_r)`` with ``a = ceil(r/2)``.  M is never materialised;
products are single ``bincount`` passes over the clause arrays.

For a parity channel the centred expectation of M is a multiple of ``u u^T``
where ``u`` is the truth vector (+1 on tuples with an even number of TRUE
literals).  Power iteration with randomized rounding converges to ``+-u``,
and the signs of ``u`` are a system of parity equations in sigma.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .clause_space import Assignment, Formula, TupleIndexer, count_tuples
from .gf2 import DecodeError, ParitySystem
from .oracles import OracleSession, QueryFunction
from .planting import (
    ClauseDistribution,
    ComplexityCertificate,
    LabeledTuples,
    ParityChannel,
    PlantedModel,
    Predicate,
    distribution_complexity,
    labeled_to_parity_clauses,
    positions_to_mask,
    predicate_channel,
    sample_formula,
    sample_goldreich_batch,
    subsample_to_parity,
)

MEMORY_CAP = 1 << 31
DEFAULT_SOLUTION_CAP = 16
DEFAULT_MAX_RESTARTS = 10
DEFAULT_HOLDOUT_FRACTION = 0.05
REPORT_SCHEMA = 1


class BudgetTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class BipartiteShape:
    n: int
    r: int
    row_indexer: TupleIndexer
    col_indexer: TupleIndexer

    @classmethod
    def for_arity(cls, n: int, r: int, cap: int = MEMORY_CAP) -> BipartiteShape:
        if r < 2:
            raise ValueError("power iteration needs r >= 2")
        a, b = (r + 1) // 2, r // 2
        n1 = count_tuples(n, a)
        if n1 > cap:
            # one int8 sign entry per row plus float64 work vectors
            raise MemoryError(f"N1 = {n1} exceeds the {cap}-entry cap; needs about {9 * n1} bytes")
        return cls(n, r, TupleIndexer(n, a), TupleIndexer(n, b))

    @property
    def N1(self) -> int:
        return self.row_indexer.size

    @property
    def N2(self) -> int:
        return self.col_indexer.size

    @property
    def N(self) -> float:
        return math.sqrt(self.N1 * self.N2)

    @property
    def domain_size(self) -> int:
        """|X_r|, the number of r-clauses."""
        return count_tuples(self.n, self.r)

    @property
    def decode_indexer(self) -> TupleIndexer:
        """Index space of the final sign vector: rows for even r, columns for odd r."""
        return self.row_indexer if self.r % 2 == 0 else self.col_indexer


def matrix_entries(formula: Formula, shape: BipartiteShape) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index of every clause, multiplicities preserved."""
    if formula.k != shape.r:
        raise ValueError(f"expected {shape.r}-clauses, got arity {formula.k}")
    a = shape.row_indexer.ell
    rows = shape.row_indexer.index_arrays(formula.variables[:, :a], formula.negated[:, :a])
    cols = shape.col_indexer.index_arrays(formula.variables[:, a:], formula.negated[:, a:])
    return rows, cols


@dataclass(frozen=True)
class ClauseMatrix:
    shape: BipartiteShape
    rows: np.ndarray
    cols: np.ndarray

    @classmethod
    def from_formula(cls, formula: Formula, shape: BipartiteShape) -> ClauseMatrix:
        return cls(shape, *matrix_entries(formula, shape))

    def __len__(self) -> int:
        return int(self.rows.size)

    def dot(self, x: np.ndarray) -> np.ndarray:
        if len(x) != self.shape.N2:
            raise ValueError(f"vector length {len(x)} != N2 = {self.shape.N2}")
        return np.bincount(self.rows, weights=np.asarray(x, dtype=float)[self.cols], minlength=self.shape.N1)

    def tdot(self, y: np.ndarray) -> np.ndarray:
        if len(y) != self.shape.N1:
            raise ValueError(f"vector length {len(y)} != N1 = {self.shape.N1}")
        return np.bincount(self.cols, weights=np.asarray(y, dtype=float)[self.rows], minlength=self.shape.N2)

    def dense(self) -> np.ndarray:
        m = np.zeros((self.shape.N1, self.shape.N2))
        np.add.at(m, (self.rows, self.cols), 1.0)
        return m


def multiply(formula: Formula, x: np.ndarray, shape: BipartiteShape) -> np.ndarray:
    return ClauseMatrix.from_formula(formula, shape).dot(x)


def multiply_transpose(formula: Formula, y: np.ndarray, shape: BipartiteShape) -> np.ndarray:
    return ClauseMatrix.from_formula(formula, shape).tdot(y)


def randomized_round(z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Keep ``sign(z_j)`` with probability ``1/2 + |z_j| / (2 max|z|)``; zeros get a fair coin."""
    z = np.asarray(z, dtype=float)
    top = np.max(np.abs(z)) if z.size else 0.0
    coins = rng.random(z.size)
    if top == 0:
        return np.where(coins < 0.5, 1, -1).astype(np.int8)
    sign = np.where(z > 0, 1, np.where(z < 0, -1, np.where(rng.random(z.size) < 0.5, 1, -1)))
    keep = coins < 0.5 + np.abs(z) / (2.0 * top)
    return np.where(keep, sign, -sign).astype(np.int8)


def ternary_round(z: np.ndarray) -> np.ndarray:
    return np.sign(np.asarray(z)).astype(np.int8)


def truth_vector(sigma: Assignment, indexer: TupleIndexer, chunk: int = 1 << 20) -> np.ndarray:
    """``(-1)^{#TRUE literals}`` for every tuple of the index space."""
    out = np.empty(indexer.size, dtype=np.int8)
    for start in range(0, indexer.size, chunk):
        idx = np.arange(start, min(start + chunk, indexer.size))
        variables, negated = indexer.unindex_arrays(idx)
        n_true = ((sigma.values[variables] == -1) ^ negated).sum(axis=1)
        out[start : start + idx.size] = 1 - 2 * (n_true % 2)
    return out


def _subset_keys(variables: np.ndarray, size: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Keys of every ``size``-subset of each tuple's variables, with the owning tuple."""
    keys, owners = [], []
    for cols in combinations(range(variables.shape[1]), size):
        sub = np.sort(variables[:, list(cols)], axis=1)
        key = np.zeros(len(variables), dtype=np.int64)
        for j in range(size):
            key = key * n + sub[:, j]
        keys.append(key)
        owners.append(np.arange(len(variables)))
    return np.concatenate(keys), np.concatenate(owners)


class Compatibility:
    """Products with the 0/1 matrix of variable-disjoint (row, column) pairs.

    This is ``M``'s expectation under uniform clauses divided by ``p``.  Rows
    sharing a variable with a column never co-occur in a clause, so the sum
    over compatible rows is the full sum minus an inclusion-exclusion over the
    column's variable subsets.
    """

    def __init__(self, shape: BipartiteShape):
        self.shape = shape
        self.row_vars, _ = shape.row_indexer.unindex_arrays(np.arange(shape.N1))
        self.col_vars, _ = shape.col_indexer.unindex_arrays(np.arange(shape.N2))

    def _apply(self, vec, src_vars, dst_vars) -> np.ndarray:
        n = self.shape.n
        vec = np.asarray(vec, dtype=float)
        out = np.full(len(dst_vars), vec.sum())
        for size in range(1, min(src_vars.shape[1], dst_vars.shape[1]) + 1):
            src_keys, src_owner = _subset_keys(src_vars, size, n)
            uniq, inv = np.unique(src_keys, return_inverse=True)
            totals = np.bincount(inv.reshape(-1), weights=vec[src_owner], minlength=len(uniq))
            dst_keys, dst_owner = _subset_keys(dst_vars, size, n)
            pos = np.clip(np.searchsorted(uniq, dst_keys), 0, len(uniq) - 1)
            hit = np.where(uniq[pos] == dst_keys, totals[pos], 0.0)
            out -= (-1) ** (size + 1) * np.bincount(dst_owner, weights=hit, minlength=len(dst_vars))
        return out

    def dot(self, x: np.ndarray) -> np.ndarray:
        return self._apply(x, self.col_vars, self.row_vars)

    def tdot(self, y: np.ndarray) -> np.ndarray:
        return self._apply(y, self.row_vars, self.col_vars)


def default_rounds(shape: BipartiteShape) -> int:
    return max(1, math.ceil(math.log(shape.N)))


def matrices_per_attempt(r: int, rounds: int) -> int:
    return rounds + 1 if r % 2 == 0 else 2 * rounds


# ---------------------------------------------------------------------------
# products: the only way the iteration touches clauses


class DirectProducts:
    """Each step draws a fresh clause matrix from ``draw`` on first use."""

    def __init__(self, shape: BipartiteShape, draw: Callable[[int], Formula], per_matrix: int):
        self.shape = shape
        self.draw = draw
        self.per_matrix = per_matrix
        self.samples = 0

    def _matrix(self) -> tuple[ClauseMatrix, float]:
        formula = self.draw(self.per_matrix)
        self.samples += self.per_matrix
        return ClauseMatrix.from_formula(formula, self.shape), len(formula) / self.shape.domain_size

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        mat, p = self._matrix()
        return mat.dot(x), p

    def backward(self, y: np.ndarray) -> tuple[np.ndarray, float]:
        mat, p = self._matrix()
        return mat.tdot(y), p


class OracleProducts:
    """Products computed from 1-MSTAT answers.

    Forward query: ``h(C) = 2 row(C) + [x_col(C) = -1]`` over ``2 N1`` values,
    so row sums of ``M x`` are ``v+ - v-``.  Backward query: the same with
    the roles of rows and columns swapped and an extra value for ``y_row = 0``.
    """

    def __init__(self, shape: BipartiteShape, session: OracleSession, restrict: Callable[[Formula], Formula], per_matrix: int):
        self.shape = shape
        self.session = session
        self.restrict = restrict
        self.per_matrix = per_matrix
        self.samples = 0

    def _answers(self, h: QueryFunction) -> np.ndarray:
        values = self.session.query_1mstat_batch(h, self.per_matrix)
        self.samples += self.per_matrix
        return values

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        shape, neg = self.shape, np.asarray(x) < 0

        def h(samples):
            rows, cols = matrix_entries(self.restrict(samples), shape)
            return 2 * rows + neg[cols]

        counts = np.bincount(self._answers(QueryFunction(2 * shape.N1, h)), minlength=2 * shape.N1)
        counts = counts.reshape(shape.N1, 2).astype(float)
        return counts[:, 0] - counts[:, 1], self.per_matrix / shape.domain_size

    def backward(self, y: np.ndarray) -> tuple[np.ndarray, float]:
        shape, y = self.shape, np.asarray(y)
        null = 2 * shape.N2

        def h(samples):
            rows, cols = matrix_entries(self.restrict(samples), shape)
            yr = y[rows]
            return np.where(yr == 0, null, 2 * cols + (yr < 0))

        counts = np.bincount(self._answers(QueryFunction(null + 1, h)), minlength=null + 1)
        counts = counts[:null].reshape(shape.N2, 2).astype(float)
        return counts[:, 0] - counts[:, 1], self.per_matrix / shape.domain_size


def _sign_with_coin(z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    coin = np.where(rng.random(z.size) < 0.5, 1, -1)
    return np.where(z > 0, 1, np.where(z < 0, -1, coin)).astype(np.int8)


def power_iterate(
    products,
    shape: BipartiteShape,
    rounds: int,
    rng: np.random.Generator,
    x0: np.ndarray | None = None,
    centering: str = "exact",
) -> tuple[np.ndarray, int]:
    """Run the discrete iteration; returns the final sign vector and the number of products.

    Even r: ``x <- round(M x - p E x)`` for ``rounds`` steps, then one more
    product gives ``u* = sign(M x - p E x)``.
    Odd r: ``y = ternary(M x)``, ``xbar = M^T y - p E^T y``, ``x = round(xbar)``
    with a fresh matrix for every product; ``u* = sign(xbar)`` of the last round.

    ``E`` is the variable-disjointness matrix (``centering="exact"``) or the
    all-ones matrix (``centering="plain"``, i.e. subtract ``p sum(x)``).
    """
    if centering == "exact":
        compat = Compatibility(shape)
        center, tcenter = compat.dot, compat.tdot
    elif centering == "plain":
        def center(v):
            return np.full(shape.N1, float(v.sum(dtype=np.int64)))

        def tcenter(v):
            return np.full(shape.N2, float(v.sum(dtype=np.int64)))
    else:
        raise ValueError(f"unknown centering {centering!r}")
    x = x0 if x0 is not None else np.where(rng.random(shape.N2) < 0.5, 1, -1).astype(np.int8)
    steps = 0
    if shape.r % 2 == 0:
        for _ in range(rounds):
            z, p = products.forward(x)
            x = randomized_round(z - p * center(x), rng)
            steps += 1
        z, p = products.forward(x)
        return _sign_with_coin(z - p * center(x), rng), steps + 1
    xbar = None
    for _ in range(rounds):
        z, _ = products.forward(x)
        y = ternary_round(z)
        xbar, p = products.backward(y)
        xbar = xbar - p * tcenter(y)
        x = randomized_round(xbar, rng)
        steps += 2
    return _sign_with_coin(xbar, rng), steps


# ---------------------------------------------------------------------------
# decoding


def parity_equations(u_star: np.ndarray, indexer: TupleIndexer, min_agreement: float = 2 / 3):
    """Majority-filtered GF(2) equations from a sign vector over literal tuples.

    Coordinate ``(l_1..l_l)`` with ``u*_j = +1`` says the literals hold an even
    number of TRUE values: ``XOR_i s_{v_i} = b XOR (XOR_i neg_i)`` with
    ``b = [u*_j = -1]`` and ``s_v = [sigma_v TRUE]``.  All coordinates over the
    same variable set vote; sets without a 2/3 majority are dropped.  Zero
    entries abstain.  Returns ``(variable sets, right-hand sides)``.
    """
    u_star = np.asarray(u_star)
    if u_star.size != indexer.size:
        raise ValueError(f"sign vector length {u_star.size} != index space size {indexer.size}")
    present = np.flatnonzero(u_star)
    variables, negated = indexer.unindex_arrays(present)
    rhs = (u_star[present] < 0).astype(np.int64) ^ (negated.sum(axis=1) % 2)
    keys = np.sort(variables, axis=1)
    groups, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    votes = np.bincount(inverse, weights=rhs, minlength=len(groups))
    total = np.bincount(inverse, minlength=len(groups))
    frac = votes / total
    keep = (frac >= min_agreement) | (frac <= 1 - min_agreement)
    return groups[keep], (frac[keep] > 0.5).astype(np.int64)


def parity_decode(
    u_star: np.ndarray,
    indexer: TupleIndexer,
    cap: int = DEFAULT_SOLUTION_CAP,
    min_agreement: float = 2 / 3,
) -> list[Assignment]:
    """Every assignment consistent with the (filtered) parity equations of ``u_star``."""
    groups, rhs = parity_equations(u_star, indexer, min_agreement)
    system = ParitySystem(indexer.n)
    if len(groups):
        system.add_equations(groups, rhs)
    return [Assignment.from_bits(s) for s in system.solutions(cap)]


def decode_both_signs(u_star: np.ndarray, indexer: TupleIndexer, cap: int = DEFAULT_SOLUTION_CAP) -> list[Assignment]:
    """Decode ``u*`` and ``-u*`` (the iteration fixes u only up to sign)."""
    found: dict[bytes, Assignment] = {}
    errors = []
    for v in (u_star, -u_star):
        try:
            for a in parity_decode(v, indexer, cap):
                found.setdefault(a.values.tobytes(), a)
        except DecodeError as exc:
            errors.append(str(exc))
    if not found:
        raise DecodeError("; ".join(errors))
    return list(found.values())


# ---------------------------------------------------------------------------
# disambiguation


@dataclass
class Disambiguation:
    best: Assignment
    tie_class: list[Assignment]
    scores: list[float]
    gap_per_sample: float


def _tuple_codes(sigma: Assignment, variables: np.ndarray, negated: np.ndarray | None) -> np.ndarray:
    true = sigma.values[variables] == -1
    if negated is not None:
        true = true ^ negated
    return (true.astype(np.int64) << np.arange(variables.shape[1])).sum(axis=1)


def _rank(candidates: list[Assignment], scores: list[float], count: int) -> Disambiguation:
    scores = [float(s) for s in scores]
    top = max(scores)
    if top == -math.inf:
        raise DecodeError("every candidate gives zero likelihood to a held-out sample")
    ties = [c for c, s in zip(candidates, scores) if s == top]
    rest = sorted((s for s in scores if s != top), reverse=True)
    gap = (top - rest[0]) / count if rest and count and rest[0] != -math.inf else (math.inf if rest else 0.0)
    return Disambiguation(ties[0], ties, scores, gap)


class _JointHoldout:
    """Held-out answers of a joint-pattern query, viewed per candidate."""

    def __init__(self, values: np.ndarray, k: int, count: int):
        self.values = values
        self.k = k
        self.count = count

    def __len__(self) -> int:
        return int(self.values.size)

    def pattern_codes(self, candidate_index: int) -> np.ndarray:
        return (self.values >> (self.k * candidate_index)) & ((1 << self.k) - 1)


def _joint_scores(candidates, holdout: _JointHoldout, q: ClauseDistribution) -> list[float]:
    with np.errstate(divide="ignore"):
        logq = np.log(q.weights)
    return [float(logq[holdout.pattern_codes(j)].sum()) for j in range(len(candidates))]


def likelihood_scores(candidates: list[Assignment], holdout: Formula, q: ClauseDistribution) -> list[float]:
    with np.errstate(divide="ignore"):
        logq = np.log(q.weights)
    return [float(logq[holdout.pattern_codes(c)].sum()) for c in candidates]


def disambiguate(candidates: list[Assignment], holdout, source) -> Disambiguation:
    """Pick the candidate that best explains held-out samples.

    Clause sources score ``sum log Q(sigma(C))``; predicate sources count
    labels that agree with the predicate.  Exact ties form the tie class.
    """
    if not candidates:
        raise ValueError("no candidates to choose from")
    if isinstance(holdout, _JointHoldout):
        scores = _joint_scores(candidates, holdout, source)
    elif isinstance(source, Predicate):
        scores = [
            float(np.sum(source.signs[_tuple_codes(c, holdout.variables, None)] == holdout.labels))
            for c in candidates
        ]
    else:
        scores = likelihood_scores(candidates, holdout, source)
    return _rank(candidates, scores, len(holdout))


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class SolveResult:
    assignment: Assignment | None
    tie_class: list[Assignment]
    report: dict
    candidates: list[Assignment] = field(default_factory=list)

    @property
    def recovered(self) -> bool | None:
        return self.report.get("recovered")


def _plan(m: int, n_matrices: int, holdout_fraction: float) -> tuple[int, int]:
    holdout = max(1, math.ceil(holdout_fraction * m))
    per_matrix = (m - holdout) // n_matrices
    if per_matrix < 1:
        raise BudgetTooSmall(f"budget {m} cannot fund {n_matrices} matrices and a holdout")
    return per_matrix, holdout


def _channel(source, cert: ComplexityCertificate) -> ParityChannel:
    if isinstance(source, Predicate):
        return predicate_channel(source, cert)
    return subsample_to_parity(source, cert)


def _base_report(model, cert, delta) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "n": model.n,
        "k": model.k,
        "r": cert.r,
        "delta": delta,
        "m_used": 0,
        "queries": 0,
        "iterations": 0,
        "restarts": 0,
        "recovered": None,
        "agreement_fraction": None,
        "tie_class_size": 0,
        "decode_error": None,
        "wall_ms": 0,
    }


def _score_truth(report: dict, ties: list[Assignment], sigma: Assignment | None) -> None:
    if sigma is None:
        return
    report["recovered"] = any(a == sigma for a in ties)
    report["agreement_fraction"] = max(a.agreement(sigma) for a in ties) / sigma.n


def solve_first_order(model: PlantedModel, m: int, rng: np.random.Generator, cert: ComplexityCertificate) -> SolveResult:
    """Correlated assignment for r = 1 from per-variable Fourier-weighted votes.

    For a clause source each occurrence of variable v at position i adds
    ``Qhat({i}) * (-1)^{negated}``, whose mean is ``sigma_v 2^k Qhat({i})^2``.
    Predicate sources use ``Phat({i}) (label - Phat(empty))`` instead.
    """
    sample_rng, _ = rng.spawn(2)
    start = time.perf_counter()
    source = model.source
    k = source.k
    first = np.array([source.fourier[positions_to_mask([i])] for i in range(k)])
    score = np.zeros(model.n)
    if isinstance(source, Predicate):
        batch = sample_goldreich_batch(model, m, sample_rng)
        mu = float(source.fourier[0])
        w = first[None, :] * (batch.labels[:, None] - mu)
        np.add.at(score, batch.variables, w)
    else:
        f = sample_formula(model, m, sample_rng)
        w = first[None, :] * np.where(f.negated, -1.0, 1.0)
        np.add.at(score, f.variables, w)
    guess = Assignment(np.where(score < 0, -1, 1))
    report = _base_report(model, cert, None)
    report["m_used"] = int(m)
    agree = guess.agreement(model.sigma)
    report["agreement_fraction"] = agree / model.n
    report["recovered"] = bool(agree >= model.n / 2 + math.sqrt(model.n))
    report["tie_class_size"] = 1
    report["wall_ms"] = int((time.perf_counter() - start) * 1000)
    return SolveResult(guess, [guess], report, [guess])


def _run_attempts(
    shape: BipartiteShape,
    make_products: Callable[[], object],
    rounds: int,
    algo_rng: np.random.Generator,
    max_restarts: int,
    cap: int,
    report: dict,
    x0: np.ndarray | None = None,
    centering: str = "exact",
) -> list[Assignment] | None:
    last_error = None
    for attempt in range(max_restarts + 1):
        products = make_products()
        u_star, steps = power_iterate(products, shape, rounds, algo_rng, x0 if attempt == 0 else None, centering)
        report["iterations"] += steps
        report["m_used"] += products.samples
        report["restarts"] = attempt
        try:
            return decode_both_signs(u_star, shape.decode_indexer, cap)
        except DecodeError as exc:
            last_error = str(exc)
    report["decode_error"] = last_error
    return None


def solve_planted(
    model: PlantedModel,
    m: int,
    rng: np.random.Generator,
    *,
    rounds: int | None = None,
    max_restarts: int = DEFAULT_MAX_RESTARTS,
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION,
    cap: int = DEFAULT_SOLUTION_CAP,
    x0: np.ndarray | None = None,
    centering: str = "exact",
) -> SolveResult:
    """Certify r, subsample to the parity channel, iterate, decode, disambiguate.

    ``m`` is the sample budget of one attempt: it is split evenly over the
    matrices of the iteration plus a held-out slice.  A decode failure starts
    a new attempt with fresh samples, up to ``max_restarts`` times; the report's
    ``m_used`` counts every sample consumed.  ``rng`` is split into a sample
    stream and an algorithm stream, in that order.
    """
    cert = distribution_complexity(model.source)
    if cert.r == 1:
        return solve_first_order(model, m, rng, cert)
    sample_rng, algo_rng = rng.spawn(2)
    start = time.perf_counter()
    source = model.source
    channel = _channel(source, cert)
    shape = BipartiteShape.for_arity(model.n, cert.r)
    rounds = rounds if rounds is not None else default_rounds(shape)
    per_matrix, holdout_size = _plan(m, matrices_per_attempt(cert.r, rounds), holdout_fraction)
    report = _base_report(model, cert, channel.delta)

    if isinstance(source, Predicate):
        def draw(count):
            batch = sample_goldreich_batch(model, count, sample_rng)
            return labeled_to_parity_clauses(source, cert, batch, sample_rng)

        def draw_holdout(count):
            return sample_goldreich_batch(model, count, sample_rng)
    else:
        def draw(count):
            return channel.apply(sample_formula(model, count, sample_rng))

        def draw_holdout(count):
            return sample_formula(model, count, sample_rng)

    candidates = _run_attempts(
        shape, lambda: DirectProducts(shape, draw, per_matrix), rounds, algo_rng, max_restarts, cap, report, x0, centering
    )
    return _finish(model, candidates, report, start, lambda: draw_holdout(holdout_size), holdout_size)


def _finish(model, candidates, report, start, fetch_holdout, holdout_size) -> SolveResult:
    if candidates is None:
        report["wall_ms"] = int((time.perf_counter() - start) * 1000)
        return SolveResult(None, [], report, [])
    holdout = fetch_holdout()
    report["m_used"] += holdout_size
    try:
        choice = disambiguate(candidates, holdout, model.source)
    except DecodeError as exc:
        # every candidate is contradicted by a held-out sample
        report["decode_error"] = str(exc)
        if getattr(model, "sigma", None) is not None:
            report["recovered"] = False
        report["wall_ms"] = int((time.perf_counter() - start) * 1000)
        return SolveResult(None, [], report, candidates)
    report["tie_class_size"] = len(choice.tie_class)
    report["log_lr_per_sample"] = choice.gap_per_sample
    sigma = getattr(model, "sigma", None)
    _score_truth(report, choice.tie_class, sigma)
    report["wall_ms"] = int((time.perf_counter() - start) * 1000)
    return SolveResult(choice.best, choice.tie_class, report, candidates)


def _joint_pattern_query(candidates: list[Assignment], k: int) -> QueryFunction:
    """One value per joint pattern of a clause under every candidate."""
    if k * len(candidates) > 62:
        raise ValueError("too many candidates for a single joint-pattern query")

    def h(samples):
        code = np.zeros(len(samples), dtype=np.int64)
        for j, c in enumerate(candidates):
            code |= samples.pattern_codes(c) << (k * j)
        return code

    return QueryFunction(1 << (k * len(candidates)), h)


def solve_via_oracle(
    session: OracleSession,
    m: int,
    rng: np.random.Generator,
    *,
    q: ClauseDistribution | None = None,
    rounds: int | None = None,
    max_restarts: int = DEFAULT_MAX_RESTARTS,
    holdout_fraction: float = DEFAULT_HOLDOUT_FRACTION,
    cap: int = DEFAULT_SOLUTION_CAP,
    centering: str = "exact",
) -> SolveResult:
    """The same pipeline driven only through 1-MSTAT queries on ``session``.

    ``m`` counts 1-MSTAT calls per attempt, split as in :func:`solve_planted`.
    Held-out disambiguation uses one joint-pattern query per call, or a
    query returning the clause's index in X_k when the candidates' patterns
    do not fit in 62 bits.  With the
    session's sample stream equal to the direct solver's sample stream, and
    ``rng`` equal to its algorithm stream, every decision matches.
    ``q`` names the clause distribution when the session's source is uniform.
    """
    source = session.source
    planted = isinstance(source, PlantedModel)
    if planted and source.is_predicate:
        raise TypeError("the oracle solver needs a clause distribution source")
    q = q if q is not None else (source.source if planted else None)
    if q is None:
        raise ValueError("a clause distribution is needed to plan the queries")
    cert = distribution_complexity(q)
    if cert.r < 2:
        raise ValueError("the oracle solver handles r >= 2")
    start = time.perf_counter()
    channel = subsample_to_parity(q, cert)
    shape = BipartiteShape.for_arity(source.n, cert.r)
    if session.max_range is not None and session.max_range < 2 * shape.N1 + 1:
        raise ValueError(f"oracle range {session.max_range} < required {2 * shape.N1 + 1}")
    rounds = rounds if rounds is not None else default_rounds(shape)
    per_matrix, holdout_size = _plan(m, matrices_per_attempt(cert.r, rounds), holdout_fraction)
    view = PlantedModel(q, source.sigma) if planted else _UnknownSigma(source.n, q)
    report = _base_report(view, cert, channel.delta)
    queries_before = session.samples_consumed

    candidates = _run_attempts(
        shape,
        lambda: OracleProducts(shape, session, channel.apply, per_matrix),
        rounds,
        rng,
        max_restarts,
        cap,
        report,
        centering=centering,
    )

    def fetch_holdout():
        if q.k * len(candidates) <= 62:
            query = _joint_pattern_query(candidates, q.k)
            report["holdout_query_range"] = query.L
            values = session.query_1mstat_batch(query, holdout_size)
            return _JointHoldout(values, q.k, len(candidates))
        # too many candidates to pack their patterns; ask for whole clauses
        ix = TupleIndexer(source.n, q.k)
        query = QueryFunction(ix.size, lambda s: ix.index_arrays(s.variables, s.negated), key="clause_index")
        report["holdout_query_range"] = query.L
        variables, negated = ix.unindex_arrays(session.query_1mstat_batch(query, holdout_size))
        return Formula(source.n, q.k, variables, negated)

    result = _finish(view, candidates, report, start, fetch_holdout, holdout_size)
    report["queries"] = session.samples_consumed - queries_before
    report["max_query_range"] = 2 * shape.N1 + (1 if cert.r % 2 else 0)
    report["lower_bound_curve"] = (shape.n / math.log(shape.n)) ** cert.r
    report["queries_times_range"] = report["queries"] * report["max_query_range"]
    return result


@dataclass
class _UnknownSigma:
    n: int
    source: ClauseDistribution
    sigma: None = None

    @property
    def k(self) -> int:
        return self.source.k
