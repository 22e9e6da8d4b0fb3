"""Command-line front end.

Subcommands cover the full pipeline: ``validate`` checks data files,
``infer`` prints belief distributions for a set of observations,
``evaluate`` scores methods against a gold standard and emits the report
tables, and ``probe`` emits the replicated-evidence convergence
trajectory as TSV.

Exit codes: 0 success, 2 input or validation error, 3 inference error.
Probabilities print with 6 decimal places, micromorts as integers.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import engine, evaluation, synth
from .decision import load_utilities, utility_coverage_violations
from .errors import InferenceError, InputError, ValidationError
from .kb import CaseRecord, KnowledgeBase, Observation, load_cases, load_kb

INFER_METHODS = evaluation.DISTRIBUTION_METHODS
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFERENCE = 3


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    raw = os.environ.get("UNCERTAIN_DX_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"UNCERTAIN_DX_SEED must be an integer, got {raw!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _parse_methods(raw: str, allowed: Sequence[str]) -> list[str]:
    methods = [m.strip() for m in raw.split(",") if m.strip()]
    if not methods:
        raise ValueError("no methods requested")
    for m in methods:
        if m not in allowed:
            raise ValueError(f"unknown method '{m}' (allowed: {', '.join(allowed)})")
    if len(set(methods)) != len(methods):
        raise ValueError("duplicate methods requested")
    return methods


def _parse_csv_floats(raw: str, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise ValueError(f"{what} must be a comma-separated list of numbers, got {raw!r}") from None


def _parse_observations(tokens: Sequence[str]) -> list[Observation]:
    observations = []
    for token in tokens:
        feature, sep, value = token.partition("=")
        if not sep or not feature or not value:
            raise ValueError(f"observation {token!r} must look like FEATURE=VALUE")
        observations.append(Observation(feature=feature, value=value))
    return observations


def _find_case(cases: Sequence[CaseRecord], case_id: str) -> CaseRecord:
    for case in cases:
        if case.id == case_id:
            return case
    raise InputError(f"case '{case_id}' not found in the case file")


def cmd_validate(args: argparse.Namespace) -> int:
    failed = False
    kb: KnowledgeBase | None = None
    try:
        kb = load_kb(args.kb)
        print("kb: OK")
    except ValidationError as exc:
        failed = True
        for violation in exc.violations:
            print(f"kb: {violation}")
    if kb is not None and args.cases is not None:
        try:
            load_cases(args.cases, kb)
            print("cases: OK")
        except ValidationError as exc:
            failed = True
            for violation in exc.violations:
                print(f"cases: {violation}")
    if args.utilities is not None:
        try:
            utilities = load_utilities(args.utilities)
            coverage = utility_coverage_violations(utilities, kb) if kb is not None else []
            if coverage:
                failed = True
                for violation in coverage:
                    print(f"utilities: {violation}")
            else:
                print("utilities: OK")
        except ValidationError as exc:
            failed = True
            for violation in exc.violations:
                print(f"utilities: {violation}")
    return EXIT_INPUT if failed else EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    kb = load_kb(args.kb)
    if args.case is not None:
        if args.observations:
            raise ValueError("give either --case or inline observations, not both")
        if args.cases is None:
            raise ValueError("--case requires --cases")
        observations = list(_find_case(load_cases(args.cases, kb), args.case).observations)
    else:
        observations = _parse_observations(args.observations)

    methods = _parse_methods(args.methods, INFER_METHODS)
    results = []
    for method in methods:
        dist = getattr(engine, method)(kb, observations)
        results.append((method, dist))

    if args.format == "json":
        doc = [
            {
                "method": method,
                "pre_norm_sum": dist.pre_norm_sum,
                "beliefs": dict(dist.sorted_items()),
            }
            for method, dist in results
        ]
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        lines = []
        for method, dist in results:
            lines.append(f"# {method} pre_norm_sum={dist.pre_norm_sum:.6f}")
            for disease, belief in dist.sorted_items():
                lines.append(f"{disease}\t{belief:.6f}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    kb = load_kb(args.kb)
    cases = load_cases(args.cases, kb)
    utilities = load_utilities(args.utilities)
    coverage = utility_coverage_violations(utilities, kb)
    if coverage:
        raise ValidationError(coverage)
    methods = _parse_methods(args.methods, evaluation.EVAL_METHODS)
    report = evaluation.evaluate_methods(
        kb,
        cases,
        utilities,
        methods,
        args.gold,
        seed=_resolve_seed(args.seed),
        iterations=args.iterations,
    )
    _emit(report.to_json() if args.format == "json" else report.to_tsv(), args.out)
    return EXIT_OK


def cmd_probe(args: argparse.Namespace) -> int:
    likelihoods = _parse_csv_floats(args.likelihoods, "--likelihoods")
    if args.priors is None:
        spec = synth.ReplicatedEvidenceSpec.uniform(likelihoods, n=1)
    else:
        priors = _parse_csv_floats(args.priors, "--priors")
        spec = synth.ReplicatedEvidenceSpec(likelihoods=likelihoods, priors=priors, n=1)
    points = synth.convergence_probe(spec, args.n_max)
    _emit(synth.probe_tsv(points), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uncertain-dx",
        description=(
            "Diagnostic inference over a probabilistic knowledge base using three "
            "uncertainty calculi, with micromort-denominated evaluation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check data files and print violations")
    p_validate.add_argument("--kb", required=True, help="knowledge-base JSON file")
    p_validate.add_argument("--cases", help="case JSON file")
    p_validate.add_argument("--utilities", help="utility-model JSON file")
    p_validate.set_defaults(func=cmd_validate)

    p_infer = sub.add_parser(
        "infer",
        help="print one belief distribution per method",
        description=(
            "Prints each requested method's distribution sorted by descending "
            "belief with its pre-normalization sum. TSV columns: disease, belief."
        ),
    )
    p_infer.add_argument("--kb", required=True, help="knowledge-base JSON file")
    p_infer.add_argument("--cases", help="case JSON file (for --case)")
    p_infer.add_argument("--case", help="case id whose observations to use")
    p_infer.add_argument(
        "observations",
        nargs="*",
        metavar="FEATURE=VALUE",
        help="inline observations",
    )
    p_infer.add_argument(
        "--methods",
        default=",".join(INFER_METHODS),
        help=f"comma-separated subset of: {', '.join(INFER_METHODS)}",
    )
    p_infer.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p_infer.add_argument("--out", help="write output to this path instead of stdout")
    p_infer.set_defaults(func=cmd_infer)

    p_eval = sub.add_parser(
        "evaluate",
        help="score methods against a gold standard and emit the report",
        description=(
            "Report sections: [decision_theoretic] (row, absolute_mean_micromorts, "
            "diff_mean, diff_sd, gold_agreement), [gold_standards] (row, "
            "absolute_mean_micromorts, diff_mean, diff_sd), [expert_ratings] "
            "(method, mean, sd), [significance] (comparison, test, statistic, asl, "
            "seed, iterations), [exclusions] (case, reason). Micromorts print as "
            "integers."
        ),
    )
    p_eval.add_argument("--kb", required=True, help="knowledge-base JSON file")
    p_eval.add_argument("--cases", required=True, help="case JSON file")
    p_eval.add_argument("--utilities", required=True, help="utility-model JSON file")
    p_eval.add_argument(
        "--methods",
        default=",".join(evaluation.EVAL_METHODS),
        help=f"comma-separated subset of: {', '.join(evaluation.EVAL_METHODS)}",
    )
    p_eval.add_argument("--gold", choices=("descriptive", "informed"), default="informed")
    p_eval.add_argument(
        "--seed",
        type=int,
        help="Monte Carlo seed (default: env UNCERTAIN_DX_SEED, then 0)",
    )
    p_eval.add_argument("--iterations", type=int, default=10000)
    p_eval.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p_eval.add_argument("--out", help="write output to this path instead of stdout")
    p_eval.set_defaults(func=cmd_evaluate)

    p_probe = sub.add_parser(
        "probe",
        help="emit the replicated-evidence convergence trajectory",
        description="TSV columns: n, method, disease, belief.",
    )
    p_probe.add_argument("--likelihoods", required=True, help="comma-separated p(E|H_i)")
    p_probe.add_argument("--priors", help="comma-separated priors (default: uniform)")
    p_probe.add_argument("--n-max", type=int, required=True, dest="n_max")
    p_probe.add_argument("--out", help="write output to this path instead of stdout")
    p_probe.set_defaults(func=cmd_probe)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InferenceError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    except (InputError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
