"""Acceptance suite: one PASS/FAIL line per criterion, printed as each test finishes.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python tests/test_acceptance.py``.  Every criterion runs its full workload;
nothing is read back from the calibration record except the constants C and
the sweep configuration that the criteria themselves name.
"""

from __future__ import annotations

import math
import sys
import time

import numpy as np
import pytest

from plantedcsp.clause_space import Assignment, count_tuples
from plantedcsp.harness import (
    ExperimentConfig,
    accuracy,
    dimacs_text,
    fit_exponent,
    load_calibration,
    parse_dimacs,
    run_distinguish_experiment,
    run_recovery_experiment,
    success_rates,
    threshold_budget,
)
from plantedcsp.oracles import (
    OracleSession,
    QueryFunction,
    SubsetSpec,
    mvstat_violations,
    reduce_mvstat_to_vstat,
    simulate_1mstat_via_1stat,
)
from plantedcsp.planting import (
    PlantedModel,
    distribution_complexity,
    kxor,
    nae_ksat,
    noisy_parity,
    planted_ksat,
    popcount,
    quiet_4sat,
    sample_formula,
    validate_distribution,
)
from plantedcsp.theory_lab import (
    DensityDeviation,
    check_decomposition,
    discrimination_norm,
    domain_size,
    domain_for,
    kappa_band_rows,
    parity_histogram_gap,
    parity_marginal_gap,
    planted_table,
    random_clause_distribution,
    random_predicate,
    random_query,
)

_capsys_holder: list = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} :: {detail}"
    if _capsys_holder:
        with _capsys_holder[-1].disabled():
            print("\n" + line, flush=True)
    else:
        print(line, flush=True)


@pytest.fixture(autouse=True)
def _expose_capsys(capsys):
    _capsys_holder.append(capsys)
    yield
    _capsys_holder.pop()


# ---------------------------------------------------------------------------
# 1. complexity certificates


def test_c01_complexity_certificates():
    start = time.perf_counter()
    expected = {
        "planted-3sat": (planted_ksat(3), 1),
        "planted-4sat": (planted_ksat(4), 1),
        "noisy-3parity": (noisy_parity(0.5), 3),
        "quiet-4sat": (quiet_4sat(), 3),
        "3xor": (kxor(3), 3),
        "4xor": (kxor(4), 4),
        "5xor": (kxor(5), 5),
    }
    got = {name: distribution_complexity(q).r for name, (q, _) in expected.items()}
    elapsed = time.perf_counter() - start
    ok = all(got[name] == r for name, (_, r) in expected.items()) and elapsed < 1.0
    report(1, "complexity certification", ok, f"r={got} in {elapsed:.3f}s (limit 1s)")
    assert ok


# ---------------------------------------------------------------------------
# 2. decomposition identity


def test_c02_decomposition_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(2020)
    n, k = 5, 3
    clause_worst = predicate_worst = 0.0
    for _ in range(100):
        q = random_clause_distribution(k, rng)
        sigma = Assignment.random(n, rng)
        h = random_query(count_tuples(n, k), rng)
        clause_worst = max(clause_worst, check_decomposition(q, sigma, h))
        p = random_predicate(k, rng)
        hp = random_query(domain_size(n, k, True), rng)
        predicate_worst = max(predicate_worst, check_decomposition(p, sigma, hp))
    elapsed = time.perf_counter() - start
    ok = clause_worst <= 1e-9 and predicate_worst <= 1e-9 and elapsed < 30
    report(
        2,
        "decomposition identity",
        ok,
        f"max residual clause={clause_worst:.2e} predicate={predicate_worst:.2e} (limit 1e-9), {elapsed:.1f}s (limit 30s)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 3. parity subsampling law


def random_q_with_complexity(k: int, r: int, rng: np.random.Generator):
    """Q = 2^-k (1 + sum_{|S|>=r} c_S chi_S) with sum |c_S| < 1 and some |S|=r term nonzero."""
    codes = np.arange(1 << k)
    masks = [m for m in range(1, 1 << k) if popcount(m) >= r]
    weights = rng.random(len(masks)) * (rng.random(len(masks)) < 0.6)
    level_r = [i for i, m in enumerate(masks) if popcount(m) == r]
    weights[rng.choice(level_r)] = 0.2 + rng.random()
    signs = rng.choice([-1.0, 1.0], size=len(masks))
    coefs = signs * weights / weights.sum() * rng.uniform(0.3, 0.95)
    table = np.ones(1 << k)
    for c, m in zip(coefs, masks):
        table += c * (-1.0) ** popcount(codes & m)
    return validate_distribution(table / (1 << k))


def test_c03_parity_subsampling_law():
    rng = np.random.default_rng(3030)
    cases = []
    while len(cases) < 100:
        k = int(rng.integers(1, 6))
        r = int(rng.integers(1, min(3, k) + 1))
        cases.append((random_q_with_complexity(k, r, rng), r))
    certified = all(distribution_complexity(q).r == r for q, r in cases)
    marginal = max(parity_marginal_gap(q) for q, _ in cases)
    histogram = max(parity_histogram_gap(q, 6, 100_000, rng) for q, _ in cases)
    ok = certified and marginal <= 1e-12 and histogram <= 0.01
    report(
        3,
        "parity subsampling law",
        ok,
        f"r as constructed={certified}, max marginal gap={marginal:.2e} (limit 1e-12), "
        f"max histogram L-inf={histogram:.4f} at 1e5 samples n=6 (limit 0.01)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 4. recovery at desk scale


def _recovery_summary(rows):
    cells = {c["n"]: c["rate"] for c in success_rates(rows)}
    slowest = max(float(r["wall_ms"]) for r in rows) / 1000
    return cells, slowest


def test_c04_recovery_r2():
    cal = load_calibration()["recovery"]["r2"]
    cfg = ExperimentConfig(model=cal["model"], ns=[100, 200, 400], m_coef=[cal["C"]], trials=20, seed=404)
    rows = run_recovery_experiment(cfg)
    rates, slowest = _recovery_summary(rows)
    ok = all(rate >= 0.9 for rate in rates.values()) and slowest < 60
    report(
        4,
        f"recovery r=2 ({cal['model']}, m={cal['C']} n ln n)",
        ok,
        f"success rates {rates} (need >= 0.9), slowest trial {slowest:.1f}s (limit 60s)",
    )
    assert ok


def test_c04_recovery_r3():
    cal = load_calibration()["recovery"]["r3"]
    cfg = ExperimentConfig(model=cal["model"], ns=[50, 100], m_coef=[cal["C"]], trials=20, seed=405)
    rows = run_recovery_experiment(cfg)
    rates, slowest = _recovery_summary(rows)
    ok = all(rate >= 0.8 for rate in rates.values()) and slowest < 300
    report(
        4,
        f"recovery r=3 ({cal['model']}, m={cal['C']} n^1.5 ln n)",
        ok,
        f"success rates {rates} (need >= 0.8), slowest trial {slowest:.1f}s (limit 300s)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 5. threshold shape


def test_c05_threshold_shape():
    shape = load_calibration()["threshold_shape"]
    grid = shape["c_grid"]
    cfg = ExperimentConfig(model=shape["model"], ns=[100, 200, 400], m_coef=grid, trials=20, seed=505, timing=False)
    rows = run_recovery_experiment(cfg)
    by_n: dict[int, list[float]] = {}
    for cell in success_rates(rows):
        by_n.setdefault(cell["n"], []).append(cell["rate"])
    mids = threshold_budget(rows, column="m_coef")
    rises = all(rates[0] <= 0.2 and rates[-1] >= 0.9 for rates in by_n.values())
    spread = max(mids.values()) / min(mids.values()) if len(mids) == 3 else math.inf
    ok = rises and spread <= 2.0
    report(
        5,
        "threshold shape",
        ok,
        f"rates over c={grid}: {by_n}; midpoints c*={ {n: round(v) for n, v in mids.items()} }, "
        f"max/min={spread:.2f} (limit 2)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 6. oracle contracts


class StreamBackend:
    """1-STAT over a categorical law; sample values are drawn in blocks."""

    def __init__(self, p, rng, block=1 << 16):
        self.p = np.asarray(p, dtype=float)
        self.rng = rng
        self.block = block
        self.buf = np.empty(0, dtype=np.int64)
        self.pos = 0
        self.calls = 0

    def __call__(self, h):
        if self.pos == self.buf.size:
            self.buf = self.rng.choice(self.p.size, size=self.block, p=self.p)
            self.pos = 0
        x = self.buf[self.pos]
        self.pos += 1
        self.calls += 1
        return int(h(np.array([x]))[0])


def test_c06_oracle_contracts():
    rng = np.random.default_rng(606)

    # honest VSTAT band on an enumerable source
    sigma = Assignment.random(4, rng)
    model = PlantedModel(quiet_4sat(), sigma)
    session = OracleSession(model, rng, t=1000)
    inside = 0
    for i in range(1000):
        code = i % 16
        h = QueryFunction(2, lambda f, c=code: (f.pattern_codes(sigma) == c).astype(np.int64))
        session.query_vstat(h)
        rec = session.query_log[-1]
        inside += abs(rec["raw"] - rec["p"]) <= rec["tau"]
    vstat_ok = inside >= 990

    # 1-MSTAT simulated from 1-STAT
    p = np.array([0.1, 0.2, 0.3, 0.4])
    backend = StreamBackend(p, rng)
    ident = QueryFunction(4, lambda s: s)
    counts = np.zeros(4)
    attempts = 0
    while counts.sum() < 100_000:
        y = simulate_1mstat_via_1stat(ident, backend, rng)
        attempts += 1
        if y is not None:
            counts[y] += 1
    rate = counts.sum() / attempts
    tv = 0.5 * float(np.abs(counts / counts.sum() - p).sum())
    mstat_ok = rate >= 1 / (2 * math.e) - 0.02 and tv <= 0.02

    # MVSTAT through VSTAT with an honest clamped backend
    odd = [c for c in range(16) if popcount(c) % 2]
    even = [c for c in range(16) if c not in odd]
    spec = SubsetSpec([[i] for i in range(16)] + [odd, even])
    mv_session = OracleSession(model, rng)
    hq = QueryFunction(16, lambda f: f.pattern_codes(sigma))
    exact = mv_session.expectation(hq)
    failures = 0
    for _ in range(1000):
        v = reduce_mvstat_to_vstat(hq, spec, lambda g, t: mv_session.query_vstat(g, t), 10)
        failures += bool(mvstat_violations(v, exact, spec, 10))
    mv_ok = failures == 0

    ok = vstat_ok and mstat_ok and mv_ok
    report(
        6,
        "oracle contracts",
        ok,
        f"VSTAT in band {inside}/1000 (need 990); 1-MSTAT success rate {rate:.4f} "
        f"(need {1 / (2 * math.e) - 0.02:.4f}), TV {tv:.4f} (limit 0.02); "
        f"MVSTAT trials violating a constraint {failures}/1000 (need 0)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 7. oracle/direct parity and query-count exponent


def test_c07_oracle_parity_and_exponent():
    common = dict(model="nae-3sat", ns=[100], m_coef=[800], trials=20, seed=707, timing=False)
    direct = run_recovery_experiment(ExperimentConfig(mode="direct", **common))
    oracle = run_recovery_experiment(ExperimentConfig(mode="oracle", **common))
    same = [d["success"] for d in direct] == [o["success"] for o in oracle]
    wins = sum(d["success"] for d in direct)

    sweep = load_calibration()["query_exponent"]
    cfg = ExperimentConfig(
        model=sweep["model"],
        ns=sweep["ns"],
        m_coef=sweep["c_grid"],
        trials=sweep["trials"],
        seed=sweep["seed"],
        mode="oracle",
        timing=False,
    )
    thr = threshold_budget(run_recovery_experiment(cfg), level=sweep["level"])
    ns = sorted(thr)
    big_n = [2 * n for n in ns]
    exponent = fit_exponent(big_n, [thr[n] / math.log(N) ** 2 for n, N in zip(ns, big_n)]) if len(ns) == 3 else math.nan
    raw = fit_exponent(big_n, [thr[n] for n in ns]) if len(ns) == 3 else math.nan
    ok = same and 0.9 <= exponent <= 1.1
    report(
        7,
        "oracle/direct parity and query exponent",
        ok,
        f"identical decisions={same} ({wins}/20 recovered at c=800, n=100); "
        f"threshold queries { {n: round(v) for n, v in thr.items()} }; exponent of Q/ln^2 N vs N = {exponent:.3f} "
        f"(band [0.9, 1.1]), raw exponent {raw:.3f}",
    )
    assert ok


# ---------------------------------------------------------------------------
# 8. kappa_2


def band_sources():
    codes = np.arange(8)
    all_equal = np.zeros(8)
    all_equal[0] = all_equal[7] = 0.5
    pair = (1 + 0.5 * (-1.0) ** ((codes & 1) + ((codes >> 1) & 1))) / 8
    return {
        "nae-3sat": nae_ksat(3),
        "all-equal-3": validate_distribution(all_equal),
        "noisy-pair": validate_distribution(pair),
    }


def test_c08_kappa():
    start = time.perf_counter()
    rng = np.random.default_rng(808)
    worst = 0.0
    for _ in range(50):
        q = random_clause_distribution(3, rng)
        sigma = Assignment.random(5, rng)
        dom = domain_for(q, 5)
        table = planted_table(q, sigma, dom)
        closed = DensityDeviation.of(table, dom.uniform()).norm
        worst = max(worst, abs(discrimination_norm(table[None, :], dom.uniform()) - closed))
    rows = kappa_band_rows(band_sources(), range(4, 9), seed=808)
    bands = {}
    exact = True
    for name in band_sources():
        mine = [r for r in rows if r["quantity"] == f"kappa_scaled[{name}]"]
        values = [float(r["value"]) for r in mine]
        exact &= all(abs(float(r["value"]) - float(r["bound"])) <= 1e-9 for r in mine)
        bands[name] = max(values) / min(values)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and all(b <= 3 for b in bands.values()) and elapsed < 120
    report(
        8,
        "discrimination norm",
        ok,
        f"m=1 closed-form gap {worst:.1e} (limit 1e-12); band ratios "
        f"{ {k: round(v, 3) for k, v in bands.items()} } (limit 3); values certified by the spectral bound={exact}; "
        f"{elapsed:.1f}s (limit 120s)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 9. distinguishing


def test_c09_distinguishing():
    n = 400
    cfg = ExperimentConfig(model="nae-3sat", ns=[n], m=[100 * n, 10], trials=200, seed=909)
    acc = {cell["m"]: cell["accuracy"] for cell in accuracy(run_distinguish_experiment(cfg))}
    ok = acc[100 * n] >= 0.9 and 0.35 <= acc[10] <= 0.65
    report(
        9,
        "distinguishing",
        ok,
        f"accuracy {acc[100 * n]:.3f} at m=100n (need 0.9), {acc[10]:.3f} at m=10 (need [0.35, 0.65]), n=400, 200 trials",
    )
    assert ok


# ---------------------------------------------------------------------------
# 10. DIMACS round trip


def test_c10_dimacs_round_trip():
    rng = np.random.default_rng(1010)
    sources = [quiet_4sat(), nae_ksat(3), planted_ksat(3), kxor(5)]
    identical = 0
    for i in range(100):
        q = sources[i % len(sources)]
        n = int(rng.integers(q.k, 80))
        m = int(rng.integers(0, 300))
        formula = sample_formula(PlantedModel(q, Assignment.random(n, rng)), m, rng)
        data = dimacs_text(formula).encode("ascii")
        again = dimacs_text(parse_dimacs(data.decode("ascii"), k=q.k)).encode("ascii")
        identical += again == data
    ok = identical == 100
    report(10, "DIMACS round trip", ok, f"{identical}/100 byte-identical")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
