"""Exact, enumeration-based checks of the structural quantities behind the
statistical lower bound.

Two sample domains are supported:

* clause mode: ``X_k``, ordered k-tuples of literals on distinct variables,
  laid out in :class:`~plantedcsp.clause_space.TupleIndexer` order;
* predicate mode: ``X'_k = Y_k x {-1, +1}``, laid out as in
  :func:`plantedcsp.oracles.exact_distribution`: all tuples with label -1,
  then all tuples with label +1.

Query functions are plain float arrays over one of these layouts.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .clause_space import Assignment, TupleIndexer, count_tuples, enumerate_clauses
from .planting import (
    ClauseDistribution,
    Predicate,
    Source,
    distribution_complexity,
    mask_to_positions,
    popcount,
    sample_formula,
    subsample_to_parity,
    PlantedModel,
)

DOMAIN_LIMIT = 10_000_000
MAX_SIGN_ENUMERATION = 22
LAB_COLUMNS = ("n", "k", "r", "quantity", "value", "bound", "trial_seed")


class DomainTooLarge(ValueError):
    """The enumerated domain would exceed :data:`DOMAIN_LIMIT`."""


class FamilyTooLarge(ValueError):
    """Exact sign enumeration was requested for more than 22 distributions."""


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Domain:
    """Enumerated sample space with per-element variables and signs."""

    n: int
    k: int
    predicate: bool
    variables: np.ndarray = field(repr=False)
    negated: np.ndarray = field(repr=False)  # clause mode only
    labels: np.ndarray = field(repr=False)  # predicate mode only

    @property
    def size(self) -> int:
        return len(self.variables)

    def uniform(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)


def domain_size(n: int, k: int, predicate: bool = False) -> int:
    return 2 * count_tuples(n, k, signed=False) if predicate else count_tuples(n, k)


def _guard(n: int, k: int, predicate: bool) -> None:
    size = domain_size(n, k, predicate)
    if size > DOMAIN_LIMIT:
        raise DomainTooLarge(f"domain of size {size} exceeds {DOMAIN_LIMIT}")


def clause_domain(n: int, k: int) -> Domain:
    _guard(n, k, False)
    f = enumerate_clauses(n, k, DOMAIN_LIMIT)
    return Domain(n, k, False, f.variables, f.negated, np.zeros(0, dtype=np.int8))


def labeled_domain(n: int, k: int) -> Domain:
    _guard(n, k, True)
    size = count_tuples(n, k, signed=False)
    if k == 0:
        variables = np.zeros((1, 0), dtype=np.int64)
    else:
        variables, _ = TupleIndexer(n, k, signed=False).unindex_arrays(np.arange(size))
    variables = np.vstack([variables, variables])
    labels = np.repeat(np.array([-1, 1], dtype=np.int8), size)
    return Domain(n, k, True, variables, np.zeros_like(variables, dtype=bool), labels)


def domain_for(source: Source, n: int, k: int | None = None) -> Domain:
    k = source.k if k is None else k
    return labeled_domain(n, k) if isinstance(source, Predicate) else clause_domain(n, k)


def _values(sigma: Assignment, dom: Domain) -> np.ndarray:
    """Literal values of every domain element (variable values in predicate mode)."""
    vals = sigma.values[dom.variables]
    if not dom.predicate:
        vals = np.where(dom.negated, -vals, vals)
    return vals


def _codes(vals: np.ndarray) -> np.ndarray:
    k = vals.shape[1]
    return ((vals == -1).astype(np.int64) << np.arange(k)).sum(axis=1)


# ---------------------------------------------------------------------------
# query vectors and deviations


@dataclass(frozen=True)
class QueryVector:
    """A query function tabulated over a domain, with its reference weights."""

    h: np.ndarray
    reference: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        if h.shape != np.shape(self.reference):
            raise ValueError("query and reference tables differ in shape")
        if not np.all(np.isfinite(h)):
            raise ValueError("query entries must be finite")
        object.__setattr__(self, "h", h)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.reference, self.h**2)))


@dataclass(frozen=True)
class DensityDeviation:
    """``d(x) = P(x) / D(x) - 1``, the kernel of the expectation-gap operator."""

    d: np.ndarray
    reference: np.ndarray

    @classmethod
    def of(cls, p: np.ndarray, reference: np.ndarray) -> DensityDeviation:
        reference = np.asarray(reference, dtype=float)
        if np.any(reference <= 0):
            raise ValueError("reference distribution must have full support")
        return cls(np.asarray(p, dtype=float) / reference - 1.0, reference)

    @property
    def mean(self) -> float:
        return float(np.dot(self.reference, self.d))

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.reference, self.d**2)))


def planted_table(source: Source, sigma: Assignment, dom: Domain | None = None) -> np.ndarray:
    """Exact probability of every domain element under the planted distribution."""
    dom = domain_for(source, sigma.n) if dom is None else dom
    codes = _codes(_values(sigma, dom))
    if isinstance(source, Predicate):
        return (1.0 + dom.labels * source.signs[codes]) / dom.size
    raw = source.weights[codes]
    return raw / raw.sum()


def delta(source: Source, sigma: Assignment, h: np.ndarray, dom: Domain | None = None) -> float:
    """Planted expectation of ``h`` minus its uniform expectation, by summation."""
    dom = domain_for(source, sigma.n) if dom is None else dom
    h = np.asarray(h, dtype=float)
    if h.shape != (dom.size,):
        raise ValueError(f"query table needs {dom.size} entries")
    return float(np.dot(planted_table(source, sigma, dom) - dom.uniform(), h))


# ---------------------------------------------------------------------------
# xor reference distributions


def xor_table(sigma: Assignment, dom: Domain) -> np.ndarray:
    """Planted l-XOR distribution over the domain.

    Clause mode keeps clauses with an odd number of TRUE literals; predicate
    mode labels each tuple with the parity of its variable values.
    """
    chi = np.prod(_values(sigma, dom), axis=1) if dom.k else np.ones(dom.size)
    if dom.predicate:
        return (1.0 + dom.labels * chi) / dom.size
    return (1.0 - chi) / dom.size


def gamma(sigma: Assignment, g: np.ndarray, ell: int, predicate: bool = False) -> float:
    """XOR expectation of ``g`` minus its uniform expectation."""
    if not predicate and ell < 1:
        raise ValueError("clause-mode gamma needs ell >= 1")
    dom = labeled_domain(sigma.n, ell) if predicate else clause_domain(sigma.n, ell)
    g = np.asarray(g, dtype=float)
    if g.shape != (dom.size,):
        raise ValueError(f"table over X_{ell} needs {dom.size} entries")
    return float(np.dot(xor_table(sigma, dom) - dom.uniform(), g))


def gamma_polynomial(sigma: Assignment, g: np.ndarray, ell: int, predicate: bool = False) -> float:
    """Same quantity as :func:`gamma`, as a signed sum of parities chi_A(sigma).

    Each variable set A of size ``ell`` collects the coefficient
    sum g(C) * (-1)^{#negations(C)} (clause mode) or sum g(C, b) * b
    (predicate mode).  The overall sign is -1 in clause mode and +1 in
    predicate mode.
    """
    dom = labeled_domain(sigma.n, ell) if predicate else clause_domain(sigma.n, ell)
    g = np.asarray(g, dtype=float)
    if ell == 0:
        weight = dom.labels if predicate else np.ones(dom.size)
        return float(np.dot(g, weight)) / dom.size
    sets = np.sort(dom.variables, axis=1)
    keys, inverse = np.unique(sets, axis=0, return_inverse=True)
    if predicate:
        sign = dom.labels.astype(float)
    else:
        sign = np.where(popcount(_codes(np.where(dom.negated, -1, 1))) % 2, -1.0, 1.0)
    coef = np.bincount(inverse.reshape(-1), weights=g * sign, minlength=len(keys))
    chi = np.prod(sigma.values[keys], axis=1)
    scale = 1.0 if predicate else -1.0
    return scale * float(np.dot(coef, chi)) / dom.size


def project_query(h: np.ndarray, n: int, k: int, positions: Sequence[int], predicate: bool = False) -> np.ndarray:
    """``h_S``: sum of ``h`` over each fiber of the restriction to ``positions``,
    scaled by ``|X_l| / |X_k|``."""
    pos = sorted(set(int(p) for p in positions))
    if pos and (pos[0] < 0 or pos[-1] >= k):
        raise ValueError(f"positions {pos} out of range for arity {k}")
    if not predicate and not pos:
        raise ValueError("clause-mode projection needs a nonempty position set")
    ell = len(pos)
    dom = labeled_domain(n, k) if predicate else clause_domain(n, k)
    h = np.asarray(h, dtype=float)
    if h.shape != (dom.size,):
        raise ValueError(f"query table needs {dom.size} entries")
    if predicate:
        inner = count_tuples(n, ell, signed=False)
        if ell:
            t = TupleIndexer(n, ell, signed=False).index_arrays(dom.variables[:, pos])
        else:
            t = np.zeros(dom.size, dtype=np.int64)
        target = np.where(dom.labels == 1, inner, 0) + t
        out_size = 2 * inner
    else:
        ix = TupleIndexer(n, ell)
        target = ix.index_arrays(dom.variables[:, pos], dom.negated[:, pos])
        out_size = ix.size
    sums = np.bincount(target, weights=h, minlength=out_size)
    return sums * (out_size / dom.size)


def query_norm(h: np.ndarray) -> float:
    """Norm of a table under the uniform distribution on its domain."""
    h = np.asarray(h, dtype=float)
    return float(np.sqrt(np.mean(h**2)))


# ---------------------------------------------------------------------------
# decomposition


CLAUSE_CONVENTION = "clause"
PREDICATE_CONVENTIONS = ("plain", "scaled")


def decomposition_rhs(source: Source, sigma: Assignment, h: np.ndarray, convention: str | None = None) -> float:
    """Right-hand side of the decomposition of the expectation gap.

    Clause sources: ``-2^k * sum_{S nonempty} Qhat(S) * gamma(h_S)``.
    Predicate sources, ``convention="plain"`` (default):
    ``sum_{S} Phat(S) * gamma(h_S)`` over all S including the empty set;
    ``convention="scaled"`` multiplies the same sum by ``-2^k``.
    """
    n, k = sigma.n, source.k
    is_pred = isinstance(source, Predicate)
    if convention is None:
        convention = "plain" if is_pred else CLAUSE_CONVENTION
    if is_pred and convention not in PREDICATE_CONVENTIONS:
        raise ValueError(f"predicate convention must be one of {PREDICATE_CONVENTIONS}")
    if not is_pred and convention != CLAUSE_CONVENTION:
        raise ValueError("clause sources use the single clause convention")
    total = 0.0
    start = 0 if is_pred else 1
    for mask in range(start, 1 << k):
        coef = float(source.fourier[mask])
        if coef == 0.0:
            continue
        pos = mask_to_positions(mask)
        h_s = project_query(h, n, k, pos, predicate=is_pred)
        total += coef * gamma(sigma, h_s, len(pos), predicate=is_pred)
    if is_pred and convention == "plain":
        return total
    return -(2.0**k) * total


def check_decomposition(source: Source, sigma: Assignment, h: np.ndarray, convention: str | None = None) -> float:
    """Absolute residual between the enumerated gap and its decomposition."""
    return abs(delta(source, sigma, h) - decomposition_rhs(source, sigma, h, convention))


# ---------------------------------------------------------------------------
# parity subsampling


def parity_marginal_gap(q: ClauseDistribution) -> float:
    """Largest gap between the marginal of Q on its witness and the parity table."""
    cert = distribution_complexity(q)
    coef = float(q.fourier[sum(1 << i for i in cert.witness)])
    r = cert.r
    ddelta = 1.0 + (-1) ** r * (1 << q.k) * coef
    codes = np.arange(1 << r)
    n_false = r - popcount(codes)
    table = np.where(n_false % 2 == 0, ddelta, 2.0 - ddelta) / (1 << r)
    return float(np.max(np.abs(q.marginal(cert.witness) - table)))


def parity_histogram_gap(q: ClauseDistribution, n: int, samples: int, rng: np.random.Generator) -> float:
    """Largest gap between sampled witness patterns and the parity table."""
    cert = distribution_complexity(q)
    channel = subsample_to_parity(q, cert)
    sigma = Assignment.random(n, rng)
    formula = channel.apply(sample_formula(PlantedModel(q, sigma), samples, rng))
    hist = np.bincount(formula.pattern_codes(sigma), minlength=1 << cert.r) / samples
    return float(np.max(np.abs(hist - channel.table())))


# ---------------------------------------------------------------------------
# discrimination norm


def _gram(deviations: np.ndarray, reference: np.ndarray) -> np.ndarray:
    d = np.asarray(deviations, dtype=float)
    return (d * reference) @ d.T


def _collapse(deviations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge identical deviation rows; equal rows always share the optimal sign."""
    rounded = np.round(deviations, 12)
    _, first, counts = np.unique(rounded, axis=0, return_index=True, return_counts=True)
    return deviations[first], counts.astype(float)


def _max_quadratic_signs(gram: np.ndarray, chunk: int = 1 << 15) -> float:
    """Exact max over sign vectors of e^T G e, with the first sign fixed to +1."""
    m = gram.shape[0]
    if m == 0:
        return 0.0
    free = m - 1
    best = -np.inf
    shifts = np.arange(free, dtype=np.int64)
    for start in range(0, 1 << free, chunk):
        idx = np.arange(start, min(start + chunk, 1 << free), dtype=np.int64)
        eps = np.ones((len(idx), m))
        if free:
            eps[:, 1:] = 1.0 - 2.0 * ((idx[:, None] >> shifts) & 1)
        vals = np.einsum("ij,jk,ik->i", eps, gram, eps)
        best = max(best, float(vals.max()))
    return best


def _ascent_quadratic_signs(gram: np.ndarray, restarts: int, rng: np.random.Generator) -> float:
    """Best local maximum of e^T G e found by sign flipping from random starts."""
    m = gram.shape[0]
    w, v = np.linalg.eigh(gram)
    starts = [np.where(v[:, -1] >= 0, 1.0, -1.0)]
    starts += [rng.choice([-1.0, 1.0], size=m) for _ in range(restarts)]
    best = -np.inf
    for eps in starts:
        while True:
            field_ = gram @ eps
            # flipping i changes the value by -4 * eps_i * (field_i - G_ii * eps_i)
            gain = -4.0 * eps * (field_ - np.diag(gram) * eps)
            i = int(np.argmax(gain))
            if gain[i] <= 1e-14 * max(1.0, abs(float(eps @ field_))):
                break
            eps[i] = -eps[i]
        best = max(best, float(eps @ gram @ eps))
    return best


@dataclass(frozen=True)
class KappaEstimate:
    """Discrimination norm value with how it was obtained.

    ``value`` comes from full sign enumeration when the family has at most 22
    distinct members, and otherwise from local search over sign patterns (a
    lower bound).  ``upper`` is the spectral bound sqrt(lambda_max / m).
    ``exact`` is True after enumeration, or when local search reaches the
    spectral bound, which certifies the value.
    """

    value: float
    upper: float
    exact: bool
    m: int


def discrimination_norm(distributions: np.ndarray, reference: np.ndarray) -> float:
    """Exact discrimination norm of a family against ``reference``.

    Equals ``(1/m) max_e ||sum_i e_i d_i||_D`` over sign vectors ``e``, the
    maximum of the mean absolute expectation gap over unit-norm queries.
    Families with more than 22 distinct members are refused.
    """
    p = np.atleast_2d(np.asarray(distributions, dtype=float))
    reference = np.asarray(reference, dtype=float)
    m = p.shape[0]
    devs, mult = _collapse(np.vstack([DensityDeviation.of(row, reference).d for row in p]))
    if len(devs) > MAX_SIGN_ENUMERATION:
        raise FamilyTooLarge(f"{len(devs)} distinct distributions exceed the sign-enumeration cap")
    gram = _gram(devs * mult[:, None], reference)
    return math.sqrt(max(_max_quadratic_signs(gram), 0.0)) / m


def estimate_discrimination_norm(
    distributions: np.ndarray,
    reference: np.ndarray,
    rng: np.random.Generator | None = None,
    restarts: int = 64,
) -> KappaEstimate:
    """Exact value when the family is small enough, local search otherwise."""
    p = np.atleast_2d(np.asarray(distributions, dtype=float))
    reference = np.asarray(reference, dtype=float)
    m = p.shape[0]
    devs, mult = _collapse(np.vstack([DensityDeviation.of(row, reference).d for row in p]))
    gram = _gram(devs * mult[:, None], reference)
    # the collapsed weighted family has the same norm; the bound uses the raw family
    raw_top = float(np.linalg.eigvalsh(_gram(np.repeat(devs, mult.astype(int), axis=0), reference))[-1])
    upper = math.sqrt(max(raw_top, 0.0) * m) / m
    if len(devs) <= MAX_SIGN_ENUMERATION:
        value = math.sqrt(max(_max_quadratic_signs(gram), 0.0)) / m
        return KappaEstimate(value, upper, True, m)
    rng = np.random.default_rng(0) if rng is None else rng
    value = math.sqrt(max(_ascent_quadratic_signs(gram, restarts, rng), 0.0)) / m
    return KappaEstimate(value, upper, value >= upper * (1 - 1e-9), m)


def discrimination_norm_dual(distributions: np.ndarray, reference: np.ndarray) -> float:
    """Independent check for families of at most four members.

    The maximizing query lies in the span of the deviations, so the problem
    reduces to ``max (e^T G c)`` over coefficient vectors ``c`` with
    ``c^T G c <= 1`` and ``e_i (G c)_i >= 0``, one convex program per sign
    orthant ``e``.  Each is solved numerically with SLSQP.
    """
    from scipy.optimize import minimize

    p = np.atleast_2d(np.asarray(distributions, dtype=float))
    m = p.shape[0]
    if m > 4:
        raise FamilyTooLarge("the dual check is limited to four distributions")
    reference = np.asarray(reference, dtype=float)
    d = np.vstack([DensityDeviation.of(row, reference).d for row in p])
    gram = _gram(d, reference)
    scale = float(np.max(np.abs(gram))) or 1.0
    g = gram / scale
    best = 0.0
    for signs in itertools.product((-1.0, 1.0), repeat=m):
        e = np.array(signs)
        cons = [
            {"type": "ineq", "fun": lambda c: 1.0 - c @ g @ c, "jac": lambda c: -2.0 * (g @ c)},
            {"type": "ineq", "fun": lambda c, e=e: e * (g @ c), "jac": lambda c, e=e: e[:, None] * g},
        ]
        res = minimize(
            lambda c, e=e: -(e @ g @ c),
            np.zeros(m),
            jac=lambda c, e=e: -(g @ e),
            constraints=cons,
            method="SLSQP",
            options={"ftol": 1e-14, "maxiter": 500},
        )
        if res.success or res.status == 8:
            c = res.x
            norm2 = float(c @ g @ c)
            if norm2 > 0 and np.all(e * (g @ c) >= -1e-9):
                best = max(best, float(np.sum(np.abs(g @ c))) / math.sqrt(norm2))
    return best * math.sqrt(scale) / m


def assignment_family(n: int) -> list[Assignment]:
    """All 2^n assignments in binary order (bit i of the index set => sigma_i = -1)."""
    idx = np.arange(1 << n)
    return [Assignment(np.where((i >> np.arange(n)) & 1, -1, 1)) for i in idx]


def family_tables(source: Source, sigmas: Iterable[Assignment], dom: Domain) -> np.ndarray:
    return np.vstack([planted_table(source, s, dom) for s in sigmas])


def family_kappa(
    source: Source,
    n: int,
    sigmas: Sequence[Assignment] | None = None,
    rng: np.random.Generator | None = None,
) -> KappaEstimate:
    """Discrimination norm of ``{Q_sigma}`` against the uniform distribution."""
    dom = domain_for(source, n)
    sigmas = assignment_family(n) if sigmas is None else sigmas
    return estimate_discrimination_norm(family_tables(source, sigmas, dom), dom.uniform(), rng)


# ---------------------------------------------------------------------------
# statistical-dimension probe


@dataclass(frozen=True)
class SDNProbe:
    """Outcome of a sampled statistical-dimension probe.

    ``estimate`` is the largest tested q for which every sampled subfamily of
    size ``2^n / q`` had discrimination norm at most kappa (0 when q=1 already
    fails).  ``failed_at`` is the first failing q, or None.  This is one-sided
    evidence: untested subfamilies may violate the bound.
    """

    estimate: int
    failed_at: int | None
    records: tuple[tuple[int, float, float, bool], ...]


def sdn_probe(
    source: Source,
    n: int,
    kappa: float | Callable[[int], float],
    qs: Sequence[int],
    trials: int,
    rng: np.random.Generator,
) -> SDNProbe:
    """Probe the statistical dimension with discrimination norm ``kappa``.

    For each q in increasing order, ``trials`` uniformly random subfamilies of
    size ``max(1, 2^n // q)`` are drawn and their discrimination norm is
    computed (exactly when at most 22 distinct members remain, otherwise by
    local search).  ``kappa`` may depend on q.  Scanning stops at the first q
    with a violating subfamily.
    """
    dom = domain_for(source, n)
    sigmas = assignment_family(n)
    tables = family_tables(source, sigmas, dom)
    reference = dom.uniform()
    estimate, failed_at = 0, None
    records = []
    for q in sorted(set(int(q) for q in qs)):
        if q < 1:
            raise ValueError("q must be at least 1")
        bound = float(kappa(q)) if callable(kappa) else float(kappa)
        size = max(1, len(sigmas) // q)
        ok = True
        for _ in range(trials):
            pick = rng.choice(len(sigmas), size=size, replace=False)
            est = estimate_discrimination_norm(tables[pick], reference, rng)
            passed = est.value <= bound * (1 + 1e-12)
            records.append((q, est.value, bound, passed))
            if not passed:
                ok = False
                break
        if not ok:
            failed_at = q
            break
        estimate = q
    return SDNProbe(estimate, failed_at, tuple(records))


# ---------------------------------------------------------------------------
# reports


def random_query(size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(size)


def random_clause_distribution(k: int, rng: np.random.Generator) -> ClauseDistribution:
    from .planting import validate_distribution

    w = rng.random(1 << k)
    return validate_distribution(w / w.sum())


def random_predicate(k: int, rng: np.random.Generator) -> Predicate:
    while True:
        bits = rng.integers(0, 2, size=1 << k)
        if 0 < bits.sum() < (1 << k):
            return Predicate(k=k, bits=bits)


def lab_rows(seed: int, trials: int = 20, n: int = 5, k: int = 3) -> list[dict]:
    """Randomized decomposition and gamma checks, one CSV row per trial."""
    rows = []
    for t in range(trials):
        trial_seed = int(np.random.SeedSequence([seed, t]).generate_state(1)[0])
        rng = np.random.default_rng(trial_seed)
        sigma = Assignment.random(n, rng)
        q = random_clause_distribution(k, rng)
        h = random_query(count_tuples(n, k), rng)
        r = distribution_complexity(q).r
        rows.append(_row(n, k, r, "decomposition_residual", check_decomposition(q, sigma, h), 1e-9, trial_seed))
        p = random_predicate(k, rng)
        hp = random_query(domain_size(n, k, True), rng)
        rp = distribution_complexity(p).r
        rows.append(_row(n, k, rp, "predicate_decomposition_residual", check_decomposition(p, sigma, hp), 1e-9, trial_seed))
        g = random_query(count_tuples(n, 2), rng)
        gap = abs(gamma(sigma, g, 2) - gamma_polynomial(sigma, g, 2))
        rows.append(_row(n, 2, 2, "gamma_two_path_gap", gap, 1e-12, trial_seed))
    return rows


def kappa_band_rows(sources: dict[str, ClauseDistribution], ns: Sequence[int], seed: int = 0) -> list[dict]:
    """kappa_2 * n^{r/2} of the full assignment family for each source and n."""
    rows = []
    for name, q in sources.items():
        r = distribution_complexity(q).r
        for n in ns:
            est = family_kappa(q, n, rng=np.random.default_rng(seed))
            rows.append(_row(n, q.k, r, f"kappa_scaled[{name}]", est.value * n ** (r / 2), est.upper * n ** (r / 2), seed))
    return rows


def _row(n, k, r, quantity, value, bound, trial_seed) -> dict:
    return {"n": n, "k": k, "r": r, "quantity": quantity, "value": value, "bound": bound, "trial_seed": trial_seed}


def write_lab_csv(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=LAB_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: (repr(v) if isinstance(v, float) else v) for key, v in row.items()})
