"""Command-line front end.

Subcommands::

    simulate   draw observations of a mechanism family to CSV
    exact      print a family's exact joint table
    ib         one bottleneck run on a table, hardened partition out
    ibssi      full statistic-acceptance sweep for one pair
    discover   adjacency search plus mark propagation on a table
    bench      rate benchmarks, cardinality curves, soundness sweep
    demo       built-in discovery walkthroughs (fig1, fig2a-d, ...)

The shared flags ``--seed``, ``--threads``, ``--out`` and ``--budget``
are accepted before or after the subcommand.  Exit codes: 0 success,
2 validation problem, 3 a wall-clock budget was exhausted.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ibcd.bench import (
    BETA_SET_NARROW,
    BETA_SET_WIDE,
    ExperimentPlan,
    report_emit,
    run_cardinality_curve,
    run_tpfp,
    soundness_suite,
    write_curve_csv,
)
from ibcd.bottleneck import BudgetExceededError, IBInput, harden, ib_optimize, scale_beta
from ibcd.demos import DEMO_IDS, run_discovery_demo
from ibcd.generators import (
    FAMILIES,
    GlmSpec,
    dormant_identified_table,
    generate_suite,
    glm_exact_table,
    sample,
)
from ibcd.graphs import render
from ibcd.orientation import DiscoveryConfig, StatisticQuery, ci_ss
from ibcd.probtable import ProbTable, SampleDataset, estimate_joint, read_csv
from ibcd.selection import IBSSIQuery, ibssi_sweep

_SUBFORM_CHOICES = ("additive", "additive_aux", "additive_child", "saturated")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _add_spec_flags(p: argparse.ArgumentParser, with_data: bool = False) -> None:
    p.add_argument("--family", choices=FAMILIES, help="mechanism family")
    p.add_argument("--n", type=int, default=8, help="trial count of the binomial output")
    p.add_argument("--sigma", type=float, default=1.0, help="noise scale (roundexp)")
    p.add_argument("--subform", choices=_SUBFORM_CHOICES, help="h shape (roundexp)")
    p.add_argument("--p", type=float, default=0.5, help="base rate for X and V1")
    p.add_argument("--p-v2", dest="p_v2", type=float, default=0.5, help="base rate for V2")
    p.add_argument(
        "--coeffs",
        help="comma-separated mechanism coefficients; omitting them draws "
        "the first faithful vector for the seed",
    )
    p.add_argument(
        "--observational",
        action="store_true",
        help="dormant: use the raw joint instead of the identified do-table",
    )
    if with_data:
        p.add_argument("--data", help="CSV dataset instead of a family table")


def _spec_from_args(args: argparse.Namespace) -> GlmSpec:
    if not args.family:
        raise ValueError("need --family (or --data where supported)")
    subform = args.subform if args.family == "roundexp" else None
    if args.coeffs:
        kwargs = dict(
            family=args.family,
            coeffs=tuple(float(c) for c in args.coeffs.split(",")),
            p_x=args.p,
            p_v1=args.p,
            p_v2=args.p_v2,
        )
        if args.family == "roundexp":
            kwargs.update(sigma=args.sigma, subform=subform)
        else:
            kwargs.update(n=args.n)
        return GlmSpec(**kwargs)
    suite = generate_suite(
        args.family,
        count=1,
        n_set=(args.n,),
        sigma_set=(args.sigma,),
        p_set=(args.p,),
        seed=args.seed,
        subform=subform,
    )
    return suite[0].spec


def _analysis_table(spec: GlmSpec, observational: bool) -> ProbTable:
    table = glm_exact_table(spec)
    if spec.family == "dormant" and not observational:
        return dormant_identified_table(table, 1)
    return table


def _split_dataset(data: SampleDataset) -> tuple[ProbTable, ProbTable]:
    if len(data) < 4:
        raise ValueError("need at least 4 rows to split into train and test")
    half = len(data) // 2
    train = SampleDataset(data.variables, data.rows[:half])
    test = SampleDataset(data.variables, data.rows[half:])
    return estimate_joint(train), estimate_joint(test)


def _train_test_tables(args: argparse.Namespace) -> tuple[ProbTable, ProbTable]:
    """Train/test pair from --data, or from a family spec (exact or sampled)."""
    if getattr(args, "data", None):
        return _split_dataset(read_csv(args.data))
    spec = _spec_from_args(args)
    rows = getattr(args, "rows", 0) or 0
    if rows:
        data = sample(spec, rows, args.seed)
        if spec.family == "dormant" and not args.observational:
            half = len(data) // 2
            first = SampleDataset(data.variables, data.rows[:half])
            second = SampleDataset(data.variables, data.rows[half:])
            return (
                dormant_identified_table(estimate_joint(first), 1, on_empty="drop"),
                dormant_identified_table(estimate_joint(second), 1, on_empty="drop"),
            )
        return _split_dataset(data)
    exact = _analysis_table(spec, args.observational)
    return exact, exact


def _open_out(args: argparse.Namespace, default_stdout: bool = True):
    if args.out in (None, "-"):
        if not default_stdout:
            raise ValueError("this command needs --out")
        return sys.stdout, False
    return Path(args.out).open("w", newline=""), True


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    data = sample(spec, args.rows, args.seed)
    if args.out in (None, "-"):
        writer = csv.writer(sys.stdout)
        writer.writerow(data.names)
        writer.writerows(data.rows.tolist())
    else:
        data.write_csv(args.out)
        print(f"wrote {len(data)} rows to {args.out}")
    return 0


def _cmd_exact(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    table = _analysis_table(spec, args.observational)
    fh, close = _open_out(args)
    try:
        writer = csv.writer(fh)
        writer.writerow([*table.names, "probability"])
        for state in np.ndindex(*table.mass.shape):
            writer.writerow([*state, float(table.mass[state])])
    finally:
        if close:
            fh.close()
    return 0


def _partition_rows(stat) -> list[dict]:
    cards = tuple(v.cardinality for v in stat.input_variables)
    out = []
    for i, state in enumerate(np.ndindex(*cards)):
        out.append({"state": list(state), "label": int(stat.labels[i])})
    return out


def _cmd_ib(args: argparse.Namespace) -> int:
    train, _ = _train_test_tables(args)
    inputs = _names(args.inputs)
    table = train.marginal([*inputs, args.target])
    n_states = int(np.prod([table.cardinality(n) for n in inputs]))
    cap = args.max_cardinality or n_states
    beta = scale_beta(table, args.beta_prime, target=args.target)
    mapping = ib_optimize(
        IBInput(
            joint=table,
            beta=beta,
            max_cardinality=cap,
            target=args.target,
            restarts=args.restarts,
        ),
        seed=args.seed,
        max_seconds=args.budget,
    )
    stat = harden(mapping)
    print(
        json.dumps(
            {
                "inputs": list(inputs),
                "target": args.target,
                "beta_prime": args.beta_prime,
                "beta": beta,
                "max_cardinality": cap,
                "cardinality": stat.cardinality,
                "objective": mapping.objective,
                "iterations": mapping.iterations,
                "converged": mapping.converged,
                "partition": _partition_rows(stat),
            },
            indent=2,
        )
    )
    return 0


def _cmd_ibssi(args: argparse.Namespace) -> int:
    train, test = _train_test_tables(args)
    query = IBSSIQuery(
        x=args.x,
        z=args.target,
        inputs=_names(args.inputs),
        train=train,
        test=test,
        beta_primes=_floats(args.beta_primes),
        use_local_criteria=args.local_criteria,
        cross_consistent=args.cross_consistent,
        restarts=args.restarts,
    )
    verdict = ibssi_sweep(query, seed=args.seed, max_seconds_per_ib=args.budget)
    payload = {
        "accepted": verdict.accepted,
        "reason": verdict.reason,
        "beta_prime": verdict.beta_prime,
        "inputs": list(verdict.inputs),
        "cardinality": verdict.statistic.cardinality if verdict.statistic else None,
        "partition": _partition_rows(verdict.statistic) if verdict.statistic else None,
    }
    if args.diagnostics:
        payload["diagnostics"] = verdict.diagnostics
    print(json.dumps(payload, indent=2))
    return 0


def _parse_query(text: str) -> StatisticQuery:
    fields: dict[str, str] = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        if not value:
            raise ValueError(f"bad query fragment {part!r}; want key=value")
        fields[key.strip()] = value.strip()
    missing = {"x", "y", "z", "inputs"} - fields.keys()
    if missing:
        raise ValueError(f"query {text!r} lacks {sorted(missing)}")
    return StatisticQuery(
        x=fields["x"],
        y=fields["y"],
        z=fields["z"],
        inputs=tuple(fields["inputs"].split("+")),
    )


def _cmd_discover(args: argparse.Namespace) -> int:
    if args.data:
        data = read_csv(args.data)
        table = estimate_joint(data)
    else:
        table = _analysis_table(_spec_from_args(args), args.observational)
    cfg = DiscoveryConfig(
        max_cond_size=args.max_cond_size,
        statistics_enabled=not args.no_statistics,
        beta_primes=_floats(args.beta_primes),
        restarts=args.restarts,
        seed=args.seed,
        threads=args.threads,
        max_seconds_per_ib=args.budget,
    )
    queries = tuple(_parse_query(q) for q in args.query or ())
    result = ci_ss(table, cfg, queries=queries)
    print(render(result.graph))
    if result.graph.noncolliders():
        print("noncolliders:")
        for triple in sorted(result.graph.noncolliders()):
            print(f"  {triple[0]} - {triple[1]} - {triple[2]}")
    if args.log:
        print("log:")
        for entry in result.log:
            print(f"  [{entry.rule}] {entry.detail}")
    if result.conflicts:
        print("conflicts:")
        for entry in result.conflicts:
            print(f"  [{entry.rule}] {entry.detail}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    out_dir = Path(args.out) if args.out else Path("bench_out")
    if args.study == "curve":
        rows = run_cardinality_curve(
            family=_names(args.families)[0],
            inputs=_names(args.inputs),
            beta_primes=_floats(args.beta_primes),
            n_rows=_ints(args.rows)[0],
            draws=args.draws,
            trial_counts=_ints(args.trial_counts),
            sigmas=_floats(args.sigmas),
            p_values=_floats(args.p_values),
            subform=args.subform,
            restarts=args.restarts,
            seed=args.seed,
            threads=args.threads,
            max_seconds_per_ib=args.budget,
        )
        out_dir.mkdir(parents=True, exist_ok=True)
        path = write_curve_csv(rows, out_dir / "curve.csv")
        for row in rows:
            print(
                f"beta'={row.beta_prime:g} cap={row.max_cardinality}: "
                f"mean |stat|={row.mean_cardinality:.2f} "
                f"selected={row.selection_ratio:.2f} ({row.runs} runs)"
            )
        print(f"wrote {path}")
        return 0
    if args.study == "soundness":
        cfg = DiscoveryConfig(seed=args.seed, threads=args.threads, max_seconds_per_ib=args.budget)
        violations = soundness_suite(seed=args.seed, draws=args.soundness_draws, cfg=cfg)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {tag: [asdict(v) for v in found] for tag, found in sorted(violations.items())}
        path = out_dir / "soundness.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        total = sum(len(v) for v in violations.values())
        for tag in sorted(violations):
            if violations[tag]:
                print(f"{tag}: {len(violations[tag])} violation(s)")
        print(f"{len(violations)} runs, {total} violations; wrote {path}")
        return 0
    kwargs = dict(
        families=_names(args.families),
        n_rows=_ints(args.rows),
        draws=args.draws,
        repetitions=args.reps,
        trial_counts=_ints(args.trial_counts),
        sigmas=_floats(args.sigmas),
        p_values=_floats(args.p_values),
        subform=args.subform,
        restarts=args.restarts,
        seed=args.seed,
        threads=args.threads,
        max_seconds_per_ib=args.budget,
    )
    if args.beta_sets:
        kwargs["beta_sets"] = tuple(_floats(part) for part in args.beta_sets.split(";"))
    if args.paper_scale:
        for key in ("families", "draws", "trial_counts", "sigmas", "p_values"):
            kwargs.pop(key, None)
        plan = ExperimentPlan.paper_scale(**kwargs)
    else:
        plan = ExperimentPlan(**kwargs)
    report = run_tpfp(plan)
    written = report_emit(report, out_dir)
    for row in report.rows:
        if row.stratum == "all":
            print(
                f"{row.family} N={row.n_rows} set={row.beta_set} rep={row.rep}: "
                f"TP={row.tp_rate:.2f} FP={row.fp_rate:.2f} TN={row.tn_rate:.2f} "
                f"({row.total} configs)"
            )
    for path in written:
        print(f"wrote {path}")
    if report.budget:
        print(f"{len(report.budget)} config(s) exceeded the per-run budget", file=sys.stderr)
        return 3
    return 0


def _cmd_demo(args: argparse.Namespace) -> int:
    if args.list:
        for system_id in DEMO_IDS:
            print(system_id)
        return 0
    if not args.id:
        raise ValueError(f"pick a demo id from {', '.join(DEMO_IDS)} (or --list)")
    cfg = DiscoveryConfig(seed=args.seed, threads=args.threads, max_seconds_per_ib=args.budget)
    result = run_discovery_demo(args.id, cfg)
    print(f"system: {result.system_id}")
    print("-- statistics off --")
    print(result.render_off)
    print("-- statistics on --")
    print(result.render_on)
    for note in result.notes:
        print(f"note: {note}")
    if args.log:
        print("log:")
        for entry in result.on.log:
            print(f"  [{entry.rule}] {entry.detail}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _build_parser() -> argparse.ArgumentParser:
    # the shared flags use SUPPRESS so a subcommand-position flag overrides
    # the root value instead of being clobbered by a subparser default
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--seed", type=int, default=argparse.SUPPRESS, help="master RNG seed (default 0)"
    )
    common.add_argument(
        "--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)"
    )
    common.add_argument(
        "--out", default=argparse.SUPPRESS, help="output file or directory (command-specific)"
    )
    common.add_argument(
        "--budget",
        type=float,
        default=argparse.SUPPRESS,
        help="wall-clock seconds allowed per optimizer run",
    )
    parser = argparse.ArgumentParser(
        prog="ibcd",
        description="statistic-aware causal structure tools",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw observations to CSV", parents=[common])
    _add_spec_flags(p)
    p.add_argument("--rows", type=int, required=True, help="number of observations")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("exact", help="print the exact joint table", parents=[common])
    _add_spec_flags(p)
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("ib", help="single bottleneck run", parents=[common])
    _add_spec_flags(p, with_data=True)
    p.add_argument("--rows", type=int, default=0, help="sample size (0 = exact table)")
    p.add_argument("--inputs", default="X,V1", help="comma-separated input variables")
    p.add_argument("--target", default="Z")
    p.add_argument("--beta-prime", dest="beta_prime", type=float, default=100.0)
    p.add_argument("--max-cardinality", dest="max_cardinality", type=int, default=None)
    p.add_argument("--restarts", type=int, default=200)
    p.set_defaults(func=_cmd_ib)

    p = sub.add_parser("ibssi", help="statistic acceptance sweep for one pair", parents=[common])
    _add_spec_flags(p, with_data=True)
    p.add_argument("--rows", type=int, default=0, help="sample size (0 = exact table)")
    p.add_argument("--inputs", default="X,V1")
    p.add_argument("--x", default="X", help="pair variable (must be among inputs)")
    p.add_argument("--target", default="Z")
    p.add_argument("--beta-primes", dest="beta_primes", default="25,50,75,100")
    p.add_argument("--restarts", type=int, default=200)
    p.add_argument("--local-criteria", dest="local_criteria", action="store_true")
    p.add_argument("--cross-consistent", dest="cross_consistent", action="store_true")
    p.add_argument("--diagnostics", action="store_true", help="include per-run diagnostics")
    p.set_defaults(func=_cmd_ibssi)

    p = sub.add_parser("discover", help="run the discovery pipeline on a table", parents=[common])
    _add_spec_flags(p, with_data=True)
    p.add_argument("--no-statistics", dest="no_statistics", action="store_true")
    p.add_argument("--max-cond-size", dest="max_cond_size", type=int, default=4)
    p.add_argument("--beta-primes", dest="beta_primes", default="25,50,75,100")
    p.add_argument("--restarts", type=int, default=200)
    p.add_argument(
        "--query",
        action="append",
        help="statistic attempt, e.g. x=X,y=V2,z=Z,inputs=X+V1 (repeatable)",
    )
    p.add_argument("--log", action="store_true", help="print the provenance log")
    p.set_defaults(func=_cmd_discover)

    p = sub.add_parser("bench", help="run a benchmark study", parents=[common])
    p.add_argument("--study", choices=("rates", "curve", "soundness"), default="rates")
    p.add_argument("--families", default="additive,saturated")
    p.add_argument("--rows", default="2500,5000,10000,20000", help="comma list; 0 = exact")
    p.add_argument("--draws", type=int, default=10, help="coefficient draws per family")
    p.add_argument("--reps", type=int, default=1, help="sampling repetitions")
    p.add_argument(
        "--beta-sets",
        dest="beta_sets",
        default=None,
        help="semicolon-separated trade-off sets, e.g. '25,50,75,100;50,75,100'",
    )
    p.add_argument("--beta-primes", dest="beta_primes", default="15,500", help="curve strengths")
    p.add_argument("--inputs", default="X,V1", help="curve input set")
    p.add_argument("--trial-counts", dest="trial_counts", default="8")
    p.add_argument("--sigmas", default="1.0")
    p.add_argument("--p-values", dest="p_values", default="0.5")
    p.add_argument("--subform", choices=_SUBFORM_CHOICES)
    p.add_argument("--restarts", type=int, default=200)
    p.add_argument("--paper-scale", dest="paper_scale", action="store_true")
    p.add_argument("--soundness-draws", dest="soundness_draws", type=int, default=2)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("demo", help="built-in discovery walkthroughs", parents=[common])
    p.add_argument("id", nargs="?", help=f"one of {', '.join(DEMO_IDS)}")
    p.add_argument("--list", action="store_true", help="list demo ids")
    p.add_argument("--log", action="store_true", help="print the provenance log")
    p.set_defaults(func=_cmd_demo)

    return parser


_SHARED_FALLBACKS = {"seed": 0, "threads": 1, "out": None, "budget": None}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    # the shared flags parse with SUPPRESS (set_defaults would leak into
    # the subparsers through the shared parent actions), so absent ones
    # get their fallbacks here
    for dest, value in _SHARED_FALLBACKS.items():
        if not hasattr(args, dest):
            setattr(args, dest, value)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
