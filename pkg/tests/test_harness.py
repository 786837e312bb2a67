import math

import numpy as np
import pytest

from plantedcsp.clause_space import Assignment, Formula, Clause, Literal
from plantedcsp.harness import (
    ConfigError,
    DimacsError,
    ExperimentConfig,
    RECOVERY_COLUMNS,
    accuracy,
    csv_text,
    dimacs_text,
    export_dimacs,
    fit_exponent,
    load_calibration,
    parity_imbalance,
    parse_dimacs,
    read_csv,
    run_distinguish_experiment,
    run_recovery_experiment,
    success_rates,
    threshold_budget,
    trial_seed,
)
from plantedcsp.planting import PlantedModel, nae_ksat, quiet_4sat, sample_formula, sample_uniform_formula


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(model="nae-3sat", ns=[])
    with pytest.raises(ConfigError):
        ExperimentConfig(model="nae-3sat", ns=[10], m=[5], m_coef=[1.0])
    with pytest.raises(ConfigError):
        ExperimentConfig(model="nae-3sat", ns=[10], m=[5], mode="batch")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": "nae-3sat", "ns": [10], "m": [5], "colour": 1})
    cfg = ExperimentConfig.from_dict({"model": "nae-3sat", "ns": [10], "m_coef": [2.0]})
    assert cfg.budgets(10, 2) == [(2.0, round(2.0 * 10 * math.log(10)))]


def test_config_file_roundtrip(tmp_path):
    import json

    cfg = ExperimentConfig(model="nae-3sat", ns=[30, 40], m=[100], trials=2, seed=9)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)


def test_trial_seeds_are_distinct_and_stable():
    seeds = {trial_seed(1, n, c, t) for n in (10, 20) for c in range(3) for t in range(5)}
    assert len(seeds) == 30
    assert trial_seed(1, 10, 0, 0) == trial_seed(1, 10, 0, 0)


def test_one_cell_one_trial_gives_header_and_one_row(tmp_path):
    out = tmp_path / "rec.csv"
    cfg = ExperimentConfig(model="nae-3sat", ns=[40], m_coef=[1500], trials=1, out=str(out))
    rows = run_recovery_experiment(cfg)
    assert len(rows) == 1
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# plantedcsp recovery v")
    assert lines[1] == ",".join(RECOVERY_COLUMNS)
    assert len(lines) == 3
    back = read_csv(out)
    assert back[0]["n"] == "40" and back[0]["success"] in ("0", "1")


def test_recovery_csv_is_reproducible_without_timing(tmp_path):
    def run(path):
        cfg = ExperimentConfig(
            model="nae-3sat", ns=[30, 40], m_coef=[300, 1500], trials=2, seed=5, out=str(path), timing=False
        )
        run_recovery_experiment(cfg)
        return path.read_bytes()

    assert run(tmp_path / "a.csv") == run(tmp_path / "b.csv")


def test_oracle_and_direct_modes_agree():
    common = dict(model="nae-3sat", ns=[50], m_coef=[900], trials=4, seed=11, timing=False)
    direct = run_recovery_experiment(ExperimentConfig(mode="direct", **common))
    oracle = run_recovery_experiment(ExperimentConfig(mode="oracle", **common))
    assert [r["success"] for r in direct] == [r["success"] for r in oracle]
    assert [r["samples"] for r in direct] == [r["queries"] for r in oracle]
    assert all(r["queries"] == 0 for r in direct)


def test_oracle_mode_rejects_first_order_models():
    with pytest.raises(ConfigError):
        run_recovery_experiment(ExperimentConfig(model="planted-3sat", ns=[20], m=[100], mode="oracle"))


def test_worker_pool_preserves_order():
    common = dict(model="nae-3sat", ns=[30], m_coef=[500, 1500], trials=2, seed=3, timing=False)
    serial = run_recovery_experiment(ExperimentConfig(**common))
    pooled = run_recovery_experiment(ExperimentConfig(workers=2, **common))
    assert serial == pooled


def test_success_rates_and_threshold_helpers():
    rows = []
    for n, rates in ((10, [0.0, 0.5, 1.0]), (20, [0.25, 0.75, 1.0])):
        for j, rate in enumerate(rates):
            m = 100 * 2**j * n
            for t in range(4):
                rows.append({"n": n, "m": m, "success": int(t < rate * 4), "queries": m})
    cells = success_rates(rows)
    assert [c["rate"] for c in cells] == [0.0, 0.5, 1.0, 0.25, 0.75, 1.0]
    thr = threshold_budget(rows)
    assert thr[10] == pytest.approx(2000)
    assert thr[20] == pytest.approx(2000 * math.sqrt(2))
    assert fit_exponent([1, 2, 4], [3, 12, 48]) == pytest.approx(2.0)


def test_parity_imbalance_separates_planted_from_uniform():
    rng = np.random.default_rng(2)
    n, m = 60, 20_000
    q = nae_ksat(3)
    planted = parity_imbalance(sample_formula(PlantedModel(q, Assignment.random(n, rng)), m, rng), (0, 1))
    uniform = parity_imbalance(sample_uniform_formula(n, 3, m, rng), (0, 1))
    assert planted.planted and planted.value / math.sqrt(planted.pairs) > 10
    assert not uniform.planted and abs(uniform.value) / math.sqrt(uniform.pairs) < 4
    empty = parity_imbalance(Formula.empty(n, 3), (0, 1))
    assert empty.pairs == 0 and not empty.planted


def test_distinguish_uniform_only_rarely_says_planted():
    cfg = ExperimentConfig(model="nae-3sat", ns=[100], m=[5000], trials=60, seed=4, truth="uniform")
    rows = run_distinguish_experiment(cfg)
    assert all(r["truth"] == "uniform" for r in rows)
    assert accuracy(rows)[0]["accuracy"] >= 0.95


def test_distinguish_rejects_predicates():
    with pytest.raises(ConfigError):
        run_distinguish_experiment(ExperimentConfig(model="parity-3", ns=[20], m=[10]))


# -- DIMACS ---------------------------------------------------------------------


def test_dimacs_single_clause_and_empty():
    f = Formula.from_clauses(2, [Clause((Literal(1), Literal(2, True)))])
    assert dimacs_text(f) == "p cnf 2 1\n1 -2 0\n"
    assert dimacs_text(Formula.empty(7, 3)) == "p cnf 7 0\n"


def test_dimacs_export_is_ascii_lf(tmp_path):
    rng = np.random.default_rng(3)
    f = sample_formula(PlantedModel(quiet_4sat(), Assignment.random(30, rng)), 50, rng)
    path = tmp_path / "q.cnf"
    export_dimacs(f, path)
    data = path.read_bytes()
    assert b"\r" not in data and data.decode("ascii").startswith("p cnf 30 50\n")
    g = parse_dimacs(data.decode("ascii"))
    assert g == f
    assert dimacs_text(g).encode("ascii") == data


def test_dimacs_parser_accepts_comments_and_wrapped_clauses():
    text = "c hello\np cnf 4 2\n1 -2\n 3 0 -4 1 2 0\n"
    f = parse_dimacs(text)
    assert f.k == 3 and len(f) == 2
    assert f.clause(1).to_dimacs() == [-4, 1, 2]


@pytest.mark.parametrize(
    "text",
    [
        "1 2 0\n",
        "p cnf 3 1\n1 2 0\n1 3 0\n",
        "p cnf 3 1\n1 2\n",
        "p cnf 3 1\n1 9 0\n",
        "p cnf 3 2\n1 2 0\n1 0\n",
        "p cnf 3 1\n1 x 0\n",
        "p dnf 3 1\n1 2 0\n",
    ],
)
def test_dimacs_parser_errors(text):
    with pytest.raises(DimacsError):
        parse_dimacs(text)


def test_csv_text_rejects_unknown_columns():
    with pytest.raises(ValueError):
        csv_text([{"n": 1, "bogus": 2}], ("n",), "x")


def test_calibration_record_present():
    cal = load_calibration()
    assert cal["recovery"]["r2"]["C"] > 0 and cal["recovery"]["r3"]["C"] > 0
