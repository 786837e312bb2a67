"""Command-line entry point: ``plantedcsp {gen,analyze,solve,oracle,lab,bench}``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .clause_space import Assignment
from .harness import (
    ConfigError,
    DISTINGUISH_COLUMNS,
    ExperimentConfig,
    RECOVERY_COLUMNS,
    accuracy,
    csv_text,
    dimacs_text,
    run_distinguish_experiment,
    run_recovery_experiment,
    success_rates,
)
from .oracles import OracleSession, QueryFunction, SubsetSpec, UniformSource
from .planting import (
    BUILTIN_MODELS,
    PlantedModel,
    Predicate,
    distribution_complexity,
    load_model,
    mask_to_positions,
    sample_formula,
    sample_goldreich_batch,
    subsample_to_parity,
    predicate_channel,
)
from .solver import solve_planted, solve_via_oracle

SEED_ENV = "PLANTEDCSP_SEED"


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        return int(env)
    return int(args.seed)


def _budget(args, source, n: int) -> int:
    if args.m is not None:
        return int(args.m)
    r = distribution_complexity(source).r
    return int(round(args.m_coef * n ** (r / 2) * math.log(n)))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_bytes(text.encode("ascii"))
    else:
        sys.stdout.write(text)


def _add_budget(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--m", type=int, help="number of samples")
    g.add_argument("--m-coef", type=float, help="samples as a multiple of n^(r/2) ln n")


def _model_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help=f"model JSON file or builtin name ({', '.join(BUILTIN_MODELS)})")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    source = load_model(args.model)
    rng = np.random.default_rng(_seed(args))
    sigma = Assignment.random(args.n, rng)
    model = PlantedModel(source, sigma)
    m = _budget(args, source, args.n)
    if isinstance(source, Predicate):
        if args.format == "dimacs":
            raise SystemExit("predicate models produce labeled tuples; use --format json")
        batch = sample_goldreich_batch(model, m, rng)
        doc = {
            "n": args.n,
            "k": source.k,
            "tuples": (batch.variables + 1).tolist(),
            "labels": batch.labels.tolist(),
            "planted": sigma.values.tolist(),
        }
        _emit(json.dumps(doc) + "\n", args.out)
        return 0
    formula = sample_formula(model, m, rng)
    if args.format == "json":
        doc = {
            "n": args.n,
            "k": source.k,
            "clauses": np.where(formula.negated, -(formula.variables + 1), formula.variables + 1).tolist(),
            "planted": sigma.values.tolist(),
        }
        _emit(json.dumps(doc) + "\n", args.out)
    else:
        _emit(dimacs_text(formula), args.out)
    return 0


def analysis(source) -> dict:
    cert = distribution_complexity(source)
    channel = predicate_channel(source, cert) if isinstance(source, Predicate) else subsample_to_parity(source, cert)
    table = [
        {"S": [p + 1 for p in mask_to_positions(mask)], "coefficient": float(c)}
        for mask, c in enumerate(source.fourier)
    ]
    return {
        "name": getattr(source, "name", ""),
        "k": source.k,
        "r": cert.r,
        "witness": [p + 1 for p in cert.witness],
        "coefficient": cert.coefficient,
        "delta": channel.delta,
        "fourier": table,
    }


def cmd_analyze(args) -> int:
    doc = analysis(load_model(args.model))
    if args.format == "json":
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
        return 0
    lines = [
        f"model: {doc['name'] or args.model}",
        f"k={doc['k']} r={doc['r']}",
        f"witness S={{{', '.join(map(str, doc['witness']))}}} coefficient={doc['coefficient']:.6g} delta={doc['delta']:.6g}",
        "Fourier table (S: coefficient):",
    ]
    for row in doc["fourier"]:
        label = "{" + ",".join(map(str, row["S"])) + "}"
        lines.append(f"  {label:<14} {row['coefficient']: .6g}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_solve(args) -> int:
    source = load_model(args.model)
    seed = _seed(args)
    plant_rng, solve_rng = np.random.default_rng(seed).spawn(2)
    model = PlantedModel(source, Assignment.random(args.n, plant_rng))
    m = _budget(args, source, args.n)
    if args.mode == "oracle":
        sample_rng, algo_rng = solve_rng.spawn(2)
        session = OracleSession(model, sample_rng)
        res = solve_via_oracle(session, m, algo_rng, max_restarts=args.max_restarts)
        if args.transcript:
            session.export_transcript(args.transcript)
    else:
        res = solve_planted(model, m, solve_rng, max_restarts=args.max_restarts)
    report = dict(res.report)
    report["seed"] = seed
    report["mode"] = args.mode
    if res.assignment is not None:
        report["assignment"] = res.assignment.values.tolist()
    _emit(json.dumps(report, sort_keys=True) + "\n", args.out)
    return 0 if report.get("recovered") is not False else 1


def script_query(spec: dict, source) -> QueryFunction:
    """Build a query from a script entry.

    ``negation_pattern``: the clause's negation bits as an integer (L = 2^k);
    ``sign_parity``: XOR of negations at ``positions`` (L = 2);
    ``variable_at``: the 0-based variable at ``position`` (L = n);
    ``label``: 1 when a labeled tuple carries label -1 (L = 2).
    """
    kind = spec.get("query")
    k, n = source.k, source.n
    if kind == "label":
        return QueryFunction(2, lambda s: (s.labels == -1).astype(np.int64), key="label")
    if kind == "negation_pattern":
        return QueryFunction(
            1 << k, lambda s: (s.negated.astype(np.int64) << np.arange(k)).sum(axis=1), key="negation_pattern"
        )
    if kind == "sign_parity":
        pos = [int(p) for p in spec["positions"]]
        return QueryFunction(
            2, lambda s: np.logical_xor.reduce(s.negated[:, pos], axis=1).astype(np.int64), key=f"sign_parity{pos}"
        )
    if kind == "variable_at":
        pos = int(spec["position"])
        return QueryFunction(n, lambda s: s.variables[:, pos], key=f"variable_at{pos}")
    raise ConfigError(f"unknown scripted query {kind!r}")


def run_script(doc: dict) -> OracleSession:
    """Run every query of a script document; returns the finished session."""
    source = load_model(doc["model"])
    n = int(doc["n"])
    rng = np.random.default_rng(int(doc.get("seed", 0)))
    plant_rng, oracle_rng = rng.spawn(2)
    if doc.get("source", "planted") == "uniform":
        target = UniformSource(n, source.k, labeled=isinstance(source, Predicate))
    else:
        target = PlantedModel(source, Assignment.random(n, plant_rng))
    session = OracleSession(target, oracle_rng, t=doc.get("t"), mode=doc.get("mode", "honest"))
    for entry in doc.get("queries", []):
        h = script_query(entry, target)
        kind = entry.get("kind", "").upper()
        repeat = int(entry.get("count", 1))
        if kind == "1-MSTAT":
            session.query_1mstat_batch(h, repeat)
        elif kind == "1-STAT":
            for _ in range(repeat):
                session.query_1stat(h)
        elif kind == "VSTAT":
            for _ in range(repeat):
                session.query_vstat(h, entry.get("t"))
        elif kind == "MVSTAT":
            subsets = entry.get("subsets", "singletons")
            spec = SubsetSpec.singletons(h.L) if subsets == "singletons" else SubsetSpec(subsets)
            for _ in range(repeat):
                session.query_mvstat(h, spec, entry.get("t"))
        else:
            raise ConfigError(f"unknown oracle kind {entry.get('kind')!r}")
    return session


def cmd_oracle(args) -> int:
    with open(args.script) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.script}: {exc}") from exc
    if os.environ.get(SEED_ENV, "").strip():
        doc["seed"] = int(os.environ[SEED_ENV])
    session = run_script(doc)
    _emit("".join(line + "\n" for line in session.transcript_lines()), args.out)
    return 0


def cmd_lab(args) -> int:
    from .planting import nae_ksat, validate_distribution
    from .theory_lab import LAB_COLUMNS, kappa_band_rows, lab_rows

    seed = _seed(args)
    rows = lab_rows(seed, trials=args.trials)
    if not args.skip_kappa:
        all_equal = np.zeros(8)
        all_equal[[0, 7]] = 0.5
        codes = np.arange(8)
        pair = (1 + 0.5 * (-1.0) ** ((codes & 1) + ((codes >> 1) & 1))) / 8
        sources = {
            "nae-3sat": nae_ksat(3),
            "all-equal-3": validate_distribution(all_equal),
            "noisy-pair": validate_distribution(pair),
        }
        rows += kappa_band_rows(sources, range(4, 9), seed)
    text = csv_text(
        ({key: (repr(v) if isinstance(v, float) else v) for key, v in row.items()} for row in rows),
        LAB_COLUMNS,
        "lab",
    )
    _emit(text, args.out)
    return 0


def cmd_bench(args) -> int:
    if args.config:
        config = ExperimentConfig.load(args.config)
    else:
        if not args.model or not args.n or (args.m is None and args.m_coef is None):
            raise ConfigError("bench needs --config or --model, --n and --m/--m-coef")
        config = ExperimentConfig(
            model=args.model,
            ns=args.n,
            m=[args.m] if args.m is not None else [],
            m_coef=[args.m_coef] if args.m_coef is not None else [],
            trials=args.trials,
            seed=args.seed,
            mode=args.mode,
        )
    if os.environ.get(SEED_ENV, "").strip():
        config.seed = int(os.environ[SEED_ENV])
    if args.out:
        config.out = args.out
    if args.kind == "distinguish":
        rows = run_distinguish_experiment(config)
        summary = accuracy(rows)
        columns, kind = DISTINGUISH_COLUMNS, "distinguish"
    else:
        rows = run_recovery_experiment(config)
        summary = success_rates(rows)
        columns, kind = RECOVERY_COLUMNS, "recovery"
    if not config.out:
        sys.stdout.write(csv_text(rows, columns, kind))
    for cell in summary:
        sys.stderr.write(json.dumps(cell) + "\n")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plantedcsp", description="Planted k-SAT and k-CSP toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a planted formula")
    _model_arg(p)
    p.add_argument("--n", type=int, required=True)
    _add_budget(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("dimacs", "json"), default="dimacs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("analyze", help="complexity certificate and Fourier table")
    _model_arg(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="recover the planted assignment")
    _model_arg(p)
    p.add_argument("--n", type=int, required=True)
    _add_budget(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("direct", "oracle"), default="direct")
    p.add_argument("--max-restarts", type=int, default=0)
    p.add_argument("--transcript", help="oracle mode: write the query transcript here")
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="run a scripted oracle session")
    p.add_argument("script", help="JSON script with model, n, seed and a list of queries")
    p.add_argument("--out", help="transcript path (JSON lines)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("lab", help="enumeration checks of the structural identities")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-kappa", action="store_true")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lab)

    p = sub.add_parser("bench", help="run a recovery or distinguishing experiment")
    p.add_argument("kind", choices=("recovery", "distinguish"))
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--model")
    p.add_argument("--n", type=int, action="append")
    _add_budget(p, required=False)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("direct", "oracle"), default="direct")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        parser.exit(2, f"plantedcsp: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
