import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plantedcsp.clause_space import Assignment, TupleIndexer, count_tuples
from plantedcsp.planting import (
    PlantedModel,
    kxor,
    nae_ksat,
    noisy_parity,
    parity_predicate,
    sample_formula,
    uniform_distribution,
    validate_distribution,
)
from plantedcsp.theory_lab import (
    DensityDeviation,
    DomainTooLarge,
    FamilyTooLarge,
    QueryVector,
    assignment_family,
    check_decomposition,
    clause_domain,
    decomposition_rhs,
    delta,
    discrimination_norm,
    discrimination_norm_dual,
    domain_for,
    domain_size,
    estimate_discrimination_norm,
    family_kappa,
    family_tables,
    gamma,
    gamma_polynomial,
    kappa_band_rows,
    lab_rows,
    parity_histogram_gap,
    parity_marginal_gap,
    planted_table,
    project_query,
    query_norm,
    random_clause_distribution,
    random_predicate,
    sdn_probe,
    write_lab_csv,
    LAB_COLUMNS,
)


def band_sources():
    all_equal = np.zeros(8)
    all_equal[0] = all_equal[7] = 0.5
    codes = np.arange(8)
    pair = (1 + 0.5 * (-1.0) ** ((codes & 1) + ((codes >> 1) & 1))) / 8
    return {
        "nae-3sat": nae_ksat(3),
        "all-equal-3": validate_distribution(all_equal),
        "noisy-pair": validate_distribution(pair),
    }


# -- delta -------------------------------------------------------------------


def test_delta_vanishes_for_uniform_source_and_constant_query():
    rng = np.random.default_rng(0)
    sigma = Assignment.random(4, rng)
    h = rng.standard_normal(count_tuples(4, 3))
    assert abs(delta(uniform_distribution(3), sigma, h)) < 1e-15
    assert abs(delta(noisy_parity(0.3), sigma, np.full(len(h), 2.5))) < 1e-14


def test_delta_matches_monte_carlo():
    rng = np.random.default_rng(1)
    n, k = 4, 2
    q = random_clause_distribution(k, rng)
    sigma = Assignment.random(n, rng)
    h = rng.standard_normal(count_tuples(n, k))
    exact = delta(q, sigma, h)
    f = sample_formula(PlantedModel(q, sigma), 1_000_000, rng)
    vals = h[TupleIndexer(n, k).index_arrays(f.variables, f.negated)]
    est = vals.mean() - h.mean()
    se = vals.std() / math.sqrt(len(vals))
    assert abs(est - exact) < 4 * se


def test_domain_guard():
    with pytest.raises(DomainTooLarge):
        clause_domain(200, 4)


def test_planted_table_normalised_and_predicate_support():
    rng = np.random.default_rng(2)
    sigma = Assignment.random(5, rng)
    p = random_predicate(3, rng)
    table = planted_table(p, sigma)
    assert table.sum() == pytest.approx(1.0)
    # exactly one label per tuple carries all the mass
    half = len(table) // 2
    assert np.all((table[:half] > 0) ^ (table[half:] > 0))


def test_query_vector_and_deviation_invariants():
    rng = np.random.default_rng(3)
    q = nae_ksat(3)
    sigma = Assignment.random(5, rng)
    dom = domain_for(q, 5)
    dev = DensityDeviation.of(planted_table(q, sigma, dom), dom.uniform())
    assert abs(dev.mean) < 1e-12
    with pytest.raises(ValueError):
        QueryVector(np.array([np.inf, 0.0]), np.array([0.5, 0.5]))
    qv = QueryVector(dev.d, dom.uniform())
    assert qv.norm == pytest.approx(dev.norm)


# -- gamma ---------------------------------------------------------------------


def test_gamma_of_constant_is_zero():
    sigma = Assignment.random(5, np.random.default_rng(4))
    g = np.full(count_tuples(5, 2), 3.0)
    assert abs(gamma(sigma, g, 2)) < 1e-15
    assert abs(gamma_polynomial(sigma, g, 2)) < 1e-14


def test_gamma_two_paths_agree_on_100_draws():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        sigma = Assignment.random(5, rng)
        g = rng.standard_normal(count_tuples(5, 2))
        worst = max(worst, abs(gamma(sigma, g, 2) - gamma_polynomial(sigma, g, 2)))
        gp = rng.standard_normal(domain_size(5, 2, True))
        worst = max(worst, abs(gamma(sigma, gp, 2, True) - gamma_polynomial(sigma, gp, 2, True)))
    assert worst <= 1e-12


@pytest.mark.parametrize("value", [1, -1])
def test_gamma_single_literal_by_hand(value):
    # X_1 holds 2n literals; Z_1 puts mass 2/(2n) on each TRUE literal.
    n = 3
    sigma = Assignment([value, 1, 1])
    g = np.zeros(2 * n)
    g[TupleIndexer(n, 1).index_arrays(np.array([[0]]), np.array([[False]]))[0]] = 1.0
    want = 1 / (2 * n) if value == -1 else -1 / (2 * n)
    assert gamma(sigma, g, 1) == pytest.approx(want, abs=1e-15)
    assert gamma_polynomial(sigma, g, 1) == pytest.approx(want, abs=1e-15)


# -- projection ------------------------------------------------------------------


def test_projection_of_constant_and_identity():
    n, k = 5, 3
    h = np.full(count_tuples(n, k), 1.7)
    for pos in [(0,), (1, 2), (0, 2)]:
        assert np.allclose(project_query(h, n, k, pos), 1.7)
    rng = np.random.default_rng(6)
    h = rng.standard_normal(count_tuples(n, k))
    assert np.allclose(project_query(h, n, k, (0, 1, 2)), h)
    hp = rng.standard_normal(domain_size(n, k, True))
    assert np.allclose(project_query(hp, n, k, (0, 1, 2), predicate=True), hp)


def test_projection_rejects_empty_clause_set():
    with pytest.raises(ValueError):
        project_query(np.zeros(count_tuples(4, 2)), 4, 2, ())


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(0,), (1,), (0, 1), (0, 2), (1, 2)]))
def test_projection_never_increases_norm(seed, pos):
    rng = np.random.default_rng(seed)
    n, k = 5, 3
    h = rng.standard_normal(count_tuples(n, k)) * rng.exponential(size=count_tuples(n, k))
    assert query_norm(project_query(h, n, k, pos)) <= query_norm(h) * (1 + 1e-12)


# -- decomposition -------------------------------------------------------------


def test_clause_decomposition_on_100_random_instances():
    rng = np.random.default_rng(7)
    n, k = 5, 3
    worst = 0.0
    for _ in range(100):
        q = random_clause_distribution(k, rng)
        sigma = Assignment.random(n, rng)
        h = rng.standard_normal(count_tuples(n, k))
        worst = max(worst, check_decomposition(q, sigma, h))
    assert worst <= 1e-9


def test_uniform_source_gives_zero_on_both_sides():
    rng = np.random.default_rng(8)
    sigma = Assignment.random(5, rng)
    h = rng.standard_normal(count_tuples(5, 3))
    q = uniform_distribution(3)
    assert abs(delta(q, sigma, h)) < 1e-15
    assert abs(decomposition_rhs(q, sigma, h)) < 1e-15


def test_predicate_decomposition_parity2():
    rng = np.random.default_rng(9)
    p = parity_predicate(2)
    for _ in range(10):
        sigma = Assignment.random(4, rng)
        h = rng.standard_normal(domain_size(4, 2, True))
        assert check_decomposition(p, sigma, h) <= 1e-9


def test_predicate_decomposition_plain_form_holds_and_scaled_form_does_not():
    rng = np.random.default_rng(10)
    worst_plain, worst_scaled = 0.0, 0.0
    for _ in range(100):
        p = random_predicate(3, rng)
        sigma = Assignment.random(5, rng)
        h = rng.standard_normal(domain_size(5, 3, True))
        worst_plain = max(worst_plain, check_decomposition(p, sigma, h, "plain"))
        worst_scaled = max(worst_scaled, check_decomposition(p, sigma, h, "scaled"))
    assert worst_plain <= 1e-9
    assert worst_scaled > 1e-3


def test_decomposition_convention_validation():
    sigma = Assignment([1, -1, 1, 1])
    with pytest.raises(ValueError):
        decomposition_rhs(kxor(2), sigma, np.zeros(count_tuples(4, 2)), "plain")
    with pytest.raises(ValueError):
        decomposition_rhs(parity_predicate(2), sigma, np.zeros(domain_size(4, 2, True)), "clause")


# -- parity subsampling --------------------------------------------------------


def test_parity_marginal_exact_for_random_sources():
    rng = np.random.default_rng(11)
    for _ in range(30):
        k = int(rng.integers(2, 6))
        assert parity_marginal_gap(random_clause_distribution(k, rng)) <= 1e-12


def test_parity_histogram_close():
    assert parity_histogram_gap(nae_ksat(3), 6, 100_000, np.random.default_rng(12)) <= 0.01


# -- discrimination norm -------------------------------------------------------


def test_kappa_of_reference_itself_is_zero():
    ref = np.full(8, 1 / 8)
    assert discrimination_norm(ref[None, :], ref) == 0.0


def test_kappa_singleton_equals_deviation_norm():
    rng = np.random.default_rng(13)
    for _ in range(20):
        q = random_clause_distribution(3, rng)
        sigma = Assignment.random(5, rng)
        dom = domain_for(q, 5)
        p = planted_table(q, sigma, dom)
        direct = DensityDeviation.of(p, dom.uniform()).norm
        assert abs(discrimination_norm(p[None, :], dom.uniform()) - direct) <= 1e-12


def test_kappa_matches_dual_program_on_small_families():
    rng = np.random.default_rng(14)
    for m in (1, 2, 3, 4):
        for _ in range(5):
            q = random_clause_distribution(2, rng)
            sigmas = [Assignment.random(4, rng) for _ in range(m)]
            dom = domain_for(q, 4)
            tables = family_tables(q, sigmas, dom)
            exact = discrimination_norm(tables, dom.uniform())
            dual = discrimination_norm_dual(tables, dom.uniform())
            assert dual == pytest.approx(exact, rel=1e-6, abs=1e-10)


def test_kappa_is_the_max_over_unit_queries():
    rng = np.random.default_rng(15)
    q = kxor(2)
    dom = domain_for(q, 4)
    sigmas = [Assignment.random(4, rng) for _ in range(6)]
    tables = family_tables(q, sigmas, dom)
    kappa = discrimination_norm(tables, dom.uniform())
    gaps = tables - dom.uniform()
    for _ in range(200):
        h = rng.standard_normal(dom.size)
        h /= query_norm(h)
        assert np.mean(np.abs(gaps @ h)) <= kappa * (1 + 1e-9)


def test_kappa_local_search_agrees_with_enumeration():
    rng = np.random.default_rng(16)
    q = random_clause_distribution(2, rng)
    dom = domain_for(q, 5)
    sigmas = [Assignment.random(5, rng) for _ in range(14)]
    tables = family_tables(q, sigmas, dom)
    exact = discrimination_norm(tables, dom.uniform())
    est = estimate_discrimination_norm(tables, dom.uniform())
    assert est.exact and est.value == pytest.approx(exact, rel=1e-12)
    assert est.upper >= exact * (1 - 1e-12)


def test_kappa_refuses_large_families():
    q = nae_ksat(3)
    dom = domain_for(q, 6)
    tables = family_tables(q, assignment_family(6), dom)
    with pytest.raises(FamilyTooLarge):
        discrimination_norm(tables, dom.uniform())


def test_full_versus_half_family_recorded():
    # No ordering is asserted between the two; both values are exact and finite.
    rng = np.random.default_rng(17)
    q = kxor(2)
    full = family_kappa(q, 5)
    half = family_kappa(q, 5, [assignment_family(5)[i] for i in rng.choice(32, 16, replace=False)])
    assert full.exact and half.exact
    assert 0 < full.value and 0 < half.value


def test_kappa_scaling_band():
    rows = kappa_band_rows(band_sources(), range(4, 9))
    by_source = {}
    for row in rows:
        by_source.setdefault(row["quantity"], []).append(row["value"])
    for values in by_source.values():
        assert max(values) / min(values) <= 3.0


# -- sdn probe -----------------------------------------------------------------


def test_probe_vacuous_kappa_reaches_max_q():
    q = kxor(2)
    probe = sdn_probe(q, 4, kappa=10.0, qs=[1, 2, 4, 8], trials=3, rng=np.random.default_rng(18))
    assert probe.estimate == 8 and probe.failed_at is None


def test_probe_zero_kappa_fails_immediately():
    probe = sdn_probe(nae_ksat(3), 4, kappa=0.0, qs=[1, 2], trials=2, rng=np.random.default_rng(19))
    assert probe.estimate == 0 and probe.failed_at == 1


def test_probe_grows_with_n_at_fixed_kappa():
    estimates = [
        sdn_probe(kxor(2), n, kappa=0.6, qs=[1, 2, 4, 8, 16, 32], trials=10, rng=np.random.default_rng(20)).estimate
        for n in (4, 5, 6)
    ]
    assert estimates == sorted(estimates)
    assert estimates[-1] > estimates[0]


# -- reports -------------------------------------------------------------------


def test_lab_rows_and_csv(tmp_path):
    rows = lab_rows(seed=3, trials=3)
    assert {r["quantity"] for r in rows} == {
        "decomposition_residual",
        "predicate_decomposition_residual",
        "gamma_two_path_gap",
    }
    assert all(r["value"] <= r["bound"] for r in rows)
    path = tmp_path / "lab.csv"
    write_lab_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(LAB_COLUMNS)
    assert len(lines) == len(rows) + 1
    write_lab_csv(lab_rows(seed=3, trials=3), tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()
