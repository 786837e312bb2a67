"""Experiment orchestration and file formats.

Recovery experiments sweep (n, m) cells and run seeded trials of the
solver; distinguishing experiments test planted against uniform samples with
a parity-imbalance statistic.  Each trial derives its seed from the root
seed, n, the cell index and the trial index, so any row can be regenerated
on its own.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .clause_space import Assignment, Formula
from .oracles import OracleSession
from .planting import (
    ClauseDistribution,
    PlantedModel,
    Predicate,
    distribution_complexity,
    load_model,
    sample_formula,
    sample_uniform_formula,
)
from .solver import solve_planted, solve_via_oracle

CSV_VERSION = 1
RECOVERY_COLUMNS = ("n", "m_coef", "m", "trial", "seed", "success", "agreement", "samples", "queries", "wall_ms")
DISTINGUISH_COLUMNS = ("n", "m", "trial", "seed", "truth", "decision", "statistic", "threshold")
SUMMARY_COLUMNS = ("n", "m", "trials", "successes", "rate")
MODES = ("direct", "oracle")
TRUTHS = ("mixed", "planted", "uniform")


class ConfigError(ValueError):
    """Malformed experiment configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """One experiment: a model, an n grid, a budget schedule and trial counts.

    Budgets are either absolute (``m``) or coefficients (``m_coef``) of
    ``n^{r/2} ln n`` where r is the model's complexity.  With ``timing``
    off the wall-clock column is left blank, so every cell of the output is
    a pure function of the config and root seed.
    """

    model: str
    ns: list[int]
    m: list[int] = field(default_factory=list)
    m_coef: list[float] = field(default_factory=list)
    trials: int = 1
    seed: int = 0
    mode: str = "direct"
    out: str | None = None
    max_restarts: int = 0
    truth: str = "mixed"
    workers: int = 1
    timing: bool = True

    def __post_init__(self) -> None:
        self.ns = [int(n) for n in self.ns]
        self.m = [int(v) for v in self.m]
        self.m_coef = [float(v) for v in self.m_coef]
        if not self.ns:
            raise ConfigError("the n grid is empty")
        if bool(self.m) == bool(self.m_coef):
            raise ConfigError("give exactly one of m and m_coef")
        if any(v < 0 for v in self.m) or any(v < 0 for v in self.m_coef):
            raise ConfigError("budgets must be nonnegative")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.truth not in TRUTHS:
            raise ConfigError(f"truth must be one of {TRUTHS}")
        if self.max_restarts < 0 or self.workers < 1:
            raise ConfigError("max_restarts must be >= 0 and workers >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "model" not in doc or "ns" not in doc:
            raise ConfigError("config needs 'model' and 'ns'")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def budgets(self, n: int, r: int) -> list[tuple[float | None, int]]:
        """(coefficient, m) for every cell of this n, in grid order."""
        if self.m:
            return [(None, v) for v in self.m]
        scale = n ** (r / 2) * math.log(n)
        return [(c, int(round(c * scale))) for c in self.m_coef]


def trial_seed(root: int, n: int, cell: int, trial: int) -> int:
    """Per-trial seed derived from the root seed and the trial's coordinates."""
    ss = np.random.SeedSequence([int(root), int(n), int(cell), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def trial_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(planting stream, solver stream) for one trial."""
    plant, solve = np.random.default_rng(seed).spawn(2)
    return plant, solve


# ---------------------------------------------------------------------------
# recovery


def _recovery_trial(job: tuple) -> dict:
    model_ref, n, coef, m, trial, seed, mode, max_restarts, timing = job
    source = load_model(model_ref)
    plant_rng, solve_rng = trial_streams(seed)
    model = PlantedModel(source, Assignment.random(n, plant_rng))
    if mode == "oracle":
        sample_rng, algo_rng = solve_rng.spawn(2)
        session = OracleSession(model, sample_rng)
        res = solve_via_oracle(session, m, algo_rng, max_restarts=max_restarts)
    else:
        res = solve_planted(model, m, solve_rng, max_restarts=max_restarts)
    rep = res.report
    agreement = rep["agreement_fraction"]
    return {
        "n": n,
        "m_coef": "" if coef is None else f"{coef:g}",
        "m": m,
        "trial": trial,
        "seed": seed,
        "success": int(bool(rep["recovered"])),
        "agreement": "" if agreement is None else f"{agreement:.6f}",
        "samples": rep["m_used"],
        "queries": rep["queries"],
        "wall_ms": rep["wall_ms"] if timing else "",
    }


def recovery_jobs(config: ExperimentConfig) -> list[tuple]:
    source = load_model(config.model)
    r = distribution_complexity(source).r
    if config.mode == "oracle" and (isinstance(source, Predicate) or r < 2):
        raise ConfigError("oracle mode needs a clause distribution with r >= 2")
    jobs = []
    for n in config.ns:
        for cell, (coef, m) in enumerate(config.budgets(n, r)):
            for trial in range(config.trials):
                seed = trial_seed(config.seed, n, cell, trial)
                jobs.append((config.model, n, coef, m, trial, seed, config.mode, config.max_restarts, config.timing))
    return jobs


def _run(func, jobs: list[tuple], workers: int) -> list[dict]:
    if workers == 1 or len(jobs) < 2:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))  # map preserves job order


def run_recovery_experiment(config: ExperimentConfig) -> list[dict]:
    """One row per (n, m, trial), in grid order; written to ``config.out`` if set."""
    rows = _run(_recovery_trial, recovery_jobs(config), config.workers)
    if config.out:
        write_csv(rows, config.out, RECOVERY_COLUMNS, "recovery")
    return rows


def success_rates(rows: Iterable[dict]) -> list[dict]:
    """Aggregate success rate per (n, m) cell, in first-seen order."""
    cells: dict[tuple[int, int], list[int]] = {}
    for row in rows:
        cells.setdefault((int(row["n"]), int(row["m"])), []).append(int(row["success"]))
    return [
        {"n": n, "m": m, "trials": len(v), "successes": sum(v), "rate": sum(v) / len(v)}
        for (n, m), v in cells.items()
    ]


# ---------------------------------------------------------------------------
# distinguishing


@dataclass(frozen=True)
class ImbalanceStatistic:
    """Pairwise parity agreement within groups of clauses sharing a variable set.

    Each clause restricted to the witness positions contributes the sign
    ``t = prod (-1)^{negated}``.  Within a group of clauses on the same
    variable set, the planted parity bias makes every product ``t_i t_j``
    positive on average, while under uniform clauses the products are
    uncorrelated fair signs.  ``value`` is the sum over all same-group pairs
    and ``pairs`` their number, so ``value / sqrt(pairs)`` is a z-score.
    """

    value: float
    pairs: int

    @property
    def threshold(self) -> float:
        return 3.0 * math.sqrt(self.pairs)

    @property
    def planted(self) -> bool:
        return self.pairs > 0 and self.value > self.threshold


def parity_imbalance(formula: Formula, positions: Sequence[int]) -> ImbalanceStatistic:
    if len(formula) == 0:
        return ImbalanceStatistic(0.0, 0)
    pos = list(positions)
    variables = np.sort(formula.variables[:, pos], axis=1)
    t = np.where(np.logical_xor.reduce(formula.negated[:, pos], axis=1), -1.0, 1.0)
    _, inverse, counts = np.unique(variables, axis=0, return_inverse=True, return_counts=True)
    sums = np.bincount(inverse.reshape(-1), weights=t)
    value = float(np.sum(sums**2 - counts) / 2)
    pairs = int(np.sum(counts * (counts - 1) // 2))
    return ImbalanceStatistic(value, pairs)


def _distinguish_trial(job: tuple) -> dict:
    model_ref, n, m, trial, seed, truth_mode = job
    source = load_model(model_ref)
    cert = distribution_complexity(source)
    rng = np.random.default_rng(seed)
    if truth_mode == "mixed":
        planted = bool(rng.random() < 0.5)
    else:
        planted = truth_mode == "planted"
    if planted:
        formula = sample_formula(PlantedModel(source, Assignment.random(n, rng)), m, rng)
    else:
        formula = sample_uniform_formula(n, source.k, m, rng)
    stat = parity_imbalance(formula, cert.witness)
    return {
        "n": n,
        "m": m,
        "trial": trial,
        "seed": seed,
        "truth": "planted" if planted else "uniform",
        "decision": "planted" if stat.planted else "uniform",
        "statistic": f"{stat.value:.1f}",
        "threshold": f"{stat.threshold:.6f}",
    }


def run_distinguish_experiment(config: ExperimentConfig) -> list[dict]:
    """Decide planted against uniform for each trial; one row per trial."""
    source = load_model(config.model)
    if not isinstance(source, ClauseDistribution):
        raise ConfigError("the distinguishing experiment needs a clause distribution")
    r = distribution_complexity(source).r
    jobs = []
    for n in config.ns:
        for cell, (_, m) in enumerate(config.budgets(n, r)):
            for trial in range(config.trials):
                seed = trial_seed(config.seed, n, cell, trial)
                jobs.append((config.model, n, m, trial, seed, config.truth))
    rows = _run(_distinguish_trial, jobs, config.workers)
    if config.out:
        write_csv(rows, config.out, DISTINGUISH_COLUMNS, "distinguish")
    return rows


def accuracy(rows: Iterable[dict]) -> list[dict]:
    cells: dict[tuple[int, int], list[int]] = {}
    for row in rows:
        cells.setdefault((int(row["n"]), int(row["m"])), []).append(int(row["truth"] == row["decision"]))
    return [{"n": n, "m": m, "trials": len(v), "accuracy": sum(v) / len(v)} for (n, m), v in cells.items()]


# ---------------------------------------------------------------------------
# files


def csv_text(rows: Iterable[dict], columns: Sequence[str], kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"# plantedcsp {kind} v{CSV_VERSION}\n")
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="raise")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_csv(rows: Iterable[dict], path: str | Path, columns: Sequence[str], kind: str) -> None:
    Path(path).write_text(csv_text(rows, columns, kind), encoding="ascii", newline="")


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def dimacs_text(formula: Formula) -> str:
    lines = [f"p cnf {formula.n} {len(formula)}"]
    codes = np.where(formula.negated, -(formula.variables + 1), formula.variables + 1)
    lines.extend(" ".join(str(int(c)) for c in row) + " 0" for row in codes)
    return "\n".join(lines) + "\n"


def export_dimacs(formula: Formula, path: str | Path) -> None:
    """Write ``formula`` as DIMACS CNF (ASCII, LF line endings)."""
    Path(path).write_bytes(dimacs_text(formula).encode("ascii"))


class DimacsError(ValueError):
    pass


def parse_dimacs(text: str, k: int | None = None) -> Formula:
    """Parse DIMACS CNF text into a fixed-arity formula.

    Comment lines (``c ...``) are skipped and clauses may span lines.  All
    clauses must have the same length; ``k`` sets the arity of an empty file.
    """
    header = None
    tokens: list[int] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("p"):
            parts = stripped.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: bad problem line {stripped!r}")
            header = (int(parts[2]), int(parts[3]))
            continue
        if header is None:
            raise DimacsError(f"line {lineno}: clause before the problem line")
        try:
            tokens.extend(int(tok) for tok in stripped.split())
        except ValueError as exc:
            raise DimacsError(f"line {lineno}: {exc}") from exc
    if header is None:
        raise DimacsError("missing problem line")
    n, m = header
    clauses: list[list[int]] = []
    current: list[int] = []
    for tok in tokens:
        if tok == 0:
            clauses.append(current)
            current = []
        else:
            if abs(tok) > n:
                raise DimacsError(f"literal {tok} outside 1..{n}")
            current.append(tok)
    if current:
        raise DimacsError("last clause is not terminated by 0")
    if len(clauses) != m:
        raise DimacsError(f"header promises {m} clauses, found {len(clauses)}")
    if not clauses:
        return Formula.empty(n, 0 if k is None else k)
    arity = {len(c) for c in clauses}
    if len(arity) != 1:
        raise DimacsError(f"mixed clause lengths {sorted(arity)}")
    codes = np.array(clauses, dtype=np.int64)
    return Formula(n, arity.pop(), np.abs(codes) - 1, codes < 0)


def load_calibration() -> dict:
    """Recorded calibration constants and the sweeps that produced them."""
    text = resources.files("plantedcsp").joinpath("data/calibration.json").read_text()
    return json.loads(text)


# ---------------------------------------------------------------------------
# threshold analysis


def threshold_budget(rows: Iterable[dict], level: float = 0.5, column: str = "queries") -> dict[int, float]:
    """Per n, the budget where the success rate first crosses ``level``.

    The budget of each cell is the mean of ``column`` over its trials; the
    crossing is interpolated linearly in log-budget between the last cell
    below ``level`` and the first cell at or above it.  An n whose rate never
    reaches ``level`` is omitted; one that starts above it reports its
    smallest budget.
    """
    cells: dict[int, dict[int, list[dict]]] = {}
    for row in rows:
        cells.setdefault(int(row["n"]), {}).setdefault(int(row["m"]), []).append(row)
    out = {}
    for n, by_m in cells.items():
        points = []
        for m in sorted(by_m):
            group = by_m[m]
            budget = float(np.mean([float(g[column]) for g in group]))
            rate = float(np.mean([int(g["success"]) for g in group]))
            points.append((budget, rate))
        prev = None
        for budget, rate in points:
            if rate >= level:
                if prev is None:
                    out[n] = budget
                else:
                    b0, r0 = prev
                    frac = (level - r0) / (rate - r0)
                    out[n] = float(math.exp(math.log(b0) + frac * (math.log(budget) - math.log(b0))))
                break
            prev = (budget, rate)
    return out


def fit_exponent(sizes: Sequence[float], counts: Sequence[float]) -> float:
    """Least-squares slope of log(count) against log(size)."""
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
