"""Command line interface. Console script name: nbtest."""

from __future__ import annotations

import argparse
import dataclasses
import json
import shlex
import sys
from pathlib import Path

from .catalog import CatalogSchemaError, load_catalog
from .finder import AnalysisReport, find_properties
from .harness import ExecutorUnavailable, HarnessError, RunConfig, execute_runs
from .instrument import InstrumentationConflict, instrument
from .mutation import (
    ALL_OPERATORS,
    OperatorInapplicable,
    apply_mutant,
    enumerate_mutants,
    kind_map_from_scan,
    mutation_score,
    score_mutant,
)
from .notebook import NotebookError, read_notebook, strip_generated, write_notebook
from .runner import RENDERERS, run_tests, scan_assertions
from .synthesis import DomainError, inject, synthesize
from .versions import evaluate_versions, transfer_assertions

CONFIG_FILE = "nbtest.config.json"

DEFAULTS = {
    "iterations": 30,
    "confidence": 0.99,
    "runs": 30,
    "timeout": 300.0,
    "jobs": 1,
    "seed": 1000,
    "format": "text",
    "catalog": None,
    "executor": None,
}


class CliError(Exception):
    pass


def _load_config_file(path: Path) -> dict:
    if not path.exists():
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CliError(f"{path}: {exc}")
    if not isinstance(data, dict):
        raise CliError(f"{path}: expected a JSON object")
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise CliError(f"{path}: unknown keys: {', '.join(unknown)}")
    return data


def _effective_config(args) -> tuple[dict, bool]:
    """flags > nbtest.config.json > defaults."""
    cfg = dict(DEFAULTS)
    file_cfg = _load_config_file(Path.cwd() / CONFIG_FILE)
    cfg.update(file_cfg)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg, bool(file_cfg)


def _executor_cmd(cfg: dict) -> list[str]:
    ex = cfg.get("executor")
    if ex is None:
        return [sys.executable, "-m", "nbtest.driver"]
    if isinstance(ex, str):
        return shlex.split(ex)
    if isinstance(ex, list) and all(isinstance(x, str) for x in ex):
        return list(ex)
    raise CliError("executor must be a command string or list of strings")


def _print_header(command: str, cfg: dict, from_file: bool, keys: tuple) -> None:
    shown = " ".join(f"{k}={cfg[k]}" for k in keys if cfg.get(k) is not None)
    source = f" ({CONFIG_FILE} applied)" if from_file else ""
    print(f"nbtest {command}: {shown}{source}")


def _workspace(args, nb_path: Path) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return nb_path.parent / f"{nb_path.stem}.work"


def _run_failures(traces) -> list[str]:
    lines = []
    for r in traces.runs:
        if r.ok:
            continue
        suffix = f": {r.detail}" if r.detail else ""
        lines.append(f"  run {r.run_index} {r.outcome}{suffix}")
        tail = r.stderr_tail.strip()
        if tail:
            lines.append("    " + tail.split("\n")[-1])
    return lines


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(args) -> int:
    cfg, from_file = _effective_config(args)
    cat = load_catalog(cfg["catalog"])
    nb = read_notebook(args.notebook)
    report = find_properties(nb, cat)
    counts = report.counts()
    print(
        f"{args.notebook}: {len(report.properties)} properties "
        f"({', '.join(f'{k}={v}' for k, v in sorted(counts.items())) or 'none'})"
    )
    for p in report.properties:
        print(
            f"  {p.property_id}  {p.kind:<10} cell {p.cell_index} line {p.anchor_line}"
            f"  [{p.context}]  {p.target}"
        )
    for cell_index, reason in report.skipped_cells:
        print(f"  warning: cell {cell_index} skipped ({reason})", file=sys.stderr)
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.report}")
    return 0


def cmd_gen(args) -> int:
    cfg, from_file = _effective_config(args)
    _print_header(
        "gen", cfg, from_file, ("iterations", "confidence", "seed", "timeout", "jobs")
    )
    cat = load_catalog(cfg["catalog"])
    nb_path = Path(args.notebook)
    nb = strip_generated(read_notebook(nb_path))
    report = find_properties(nb, cat)
    for cell_index, reason in report.skipped_cells:
        print(f"warning: cell {cell_index} skipped ({reason})", file=sys.stderr)
    if not report.properties:
        print("no trackable properties found; nothing to generate")
        return 0
    print(f"tracking {len(report.properties)} properties")

    run_cfg = RunConfig(
        workspace=_workspace(args, nb_path),
        iterations=cfg["iterations"],
        timeout_seconds=cfg["timeout"],
        parallelism=cfg["jobs"],
        base_seed=cfg["seed"],
        asserts=False,
    )
    executor = _executor_cmd(cfg)
    traces = execute_runs(
        lambda seed: instrument(nb, report, seed, cat).notebook,
        run_cfg,
        executor,
        source_dir=nb_path.parent,
        notebook_name=nb_path.name,
    )
    ok = len(traces.ok_runs)
    print(f"{ok}/{len(traces.runs)} generation runs completed cleanly")
    if traces.failed_fraction > 0.5:
        print("error: more than half of generation runs failed, aborting", file=sys.stderr)
        for line in _run_failures(traces):
            print(line, file=sys.stderr)
        return 1

    sampled, dropped = [], []
    for p in report.properties:
        (sampled if traces.samples.get(p.property_id) else dropped).append(p)
    for p in dropped:
        print(f"warning: {p.property_id} produced no samples, dropping", file=sys.stderr)
    result = synthesize(
        AnalysisReport(tuple(sampled), report.skipped_cells), traces, cfg["confidence"]
    )
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)

    test_nb = inject(nb, result.specs)
    test_path = nb_path.parent / f"{nb_path.stem}.nbtest.ipynb"
    manifest_path = nb_path.parent / f"{nb_path.stem}.nbtest.json"
    write_notebook(test_nb, test_path)
    manifest = {
        "notebook": nb_path.name,
        "test_notebook": test_path.name,
        "config": {
            "iterations": cfg["iterations"],
            "confidence": cfg["confidence"],
            "seed": cfg["seed"],
            "timeout": cfg["timeout"],
        },
        "runs": [{"run_index": r.run_index, "outcome": r.outcome} for r in traces.runs],
        "properties": report.to_dict(),
        "assertions": [dataclasses.asdict(s) for s in result.specs],
        "kinds": result.manifest(),
        "warnings": result.warnings,
    }
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {test_path} ({len(result.specs)} assertions)")
    print(f"wrote {manifest_path}")
    return 0


def cmd_run(args) -> int:
    cfg, from_file = _effective_config(args)
    _print_header("run", cfg, from_file, ("runs", "seed", "timeout", "jobs", "format"))
    nb_path = Path(args.notebook)
    nb = read_notebook(nb_path)
    run_cfg = RunConfig(
        workspace=_workspace(args, nb_path),
        iterations=cfg["runs"],
        timeout_seconds=cfg["timeout"],
        parallelism=cfg["jobs"],
        base_seed=cfg["seed"],
    )
    report = run_tests(
        nb, run_cfg, _executor_cmd(cfg), source_dir=nb_path.parent, notebook_name=nb_path.name
    )
    rendered = RENDERERS[cfg["format"]](report)
    print(rendered, end="")
    if args.report:
        Path(args.report).write_text(rendered, encoding="utf-8")
    return report.exit_code


def cmd_mutate(args) -> int:
    cfg, from_file = _effective_config(args)
    _print_header("mutate", cfg, from_file, ("runs", "seed", "timeout", "jobs"))
    cat = load_catalog(cfg["catalog"])
    nb_path = Path(args.notebook)
    nb = read_notebook(nb_path)
    expected = scan_assertions(nb)
    if not expected:
        print("error: notebook has no generated assertions to evaluate", file=sys.stderr)
        return 2

    kinds = None
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        kinds = manifest.get("kinds")
    if kinds is None:
        kinds = kind_map_from_scan(expected)

    operators = None
    if args.operators:
        operators = [op.strip() for op in args.operators.split(",") if op.strip()]
        bad = [op for op in operators if op not in ALL_OPERATORS]
        if bad:
            raise CliError(
                f"unknown operators: {', '.join(bad)} (known: {', '.join(ALL_OPERATORS)})"
            )
    specs = enumerate_mutants(
        nb, cat, seed=cfg["seed"], operators=operators, max_per_op=args.max_per_op
    )
    if not specs:
        print("no applicable mutation sites found")
        return 0
    print(f"evaluating {len(specs)} mutants over {cfg['runs']} runs each")

    executor = _executor_cmd(cfg)
    workspace = _workspace(args, nb_path)
    results = []
    for spec in specs:
        try:
            app = apply_mutant(nb, spec, cat, source_dir=nb_path.parent)
        except OperatorInapplicable as exc:
            from .mutation import MutantResult

            res = MutantResult(spec, note=str(exc))
            results.append(res)
            print(f"  {spec.mutant_id:<22} inapplicable  ({exc})")
            continue
        run_cfg = RunConfig(
            workspace=workspace / spec.mutant_id,
            iterations=cfg["runs"],
            timeout_seconds=cfg["timeout"],
            parallelism=cfg["jobs"],
            base_seed=cfg["seed"],
            asserts=True,
        )
        traces = execute_runs(
            lambda seed: app.notebook,
            run_cfg,
            executor,
            source_dir=nb_path.parent,
            notebook_name=nb_path.name,
            file_overrides=app.data_overrides,
        )
        res = score_mutant(spec, traces, kinds)
        results.append(res)
        frac = f"{res.kill_fraction:.2f}" if res.kill_fraction is not None else "-"
        print(f"  {spec.mutant_id:<22} {res.outcome:<10} kill_fraction={frac}")

    fractions = [r.kill_fraction for r in results if r.kill_fraction is not None]
    killed_by: dict[str, int] = {}
    for r in results:
        for k, v in r.killed_by.items():
            killed_by[k] = killed_by.get(k, 0) + v
    score = mutation_score(fractions)
    print(f"mutation score: {score:.4f} over {len(fractions)} scored mutants")
    if killed_by:
        print(
            "kills by property kind: "
            + ", ".join(f"{k}={v}" for k, v in sorted(killed_by.items()))
        )
    if args.report:
        payload = {
            "notebook": nb_path.name,
            "mutation_score": score,
            "killed_by": killed_by,
            "mutants": [r.to_dict() for r in results],
        }
        Path(args.report).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.report}")
    return 0


def cmd_transfer(args) -> int:
    src = read_notebook(args.src)
    dst = read_notebook(args.dst)
    result = transfer_assertions(src, dst)
    dst_path = Path(args.dst)
    out_path = Path(args.out) if args.out else dst_path.parent / f"{dst_path.stem}.nbtest.ipynb"
    write_notebook(result.notebook, out_path)
    print(
        f"transferred {result.transferred}/{result.total} assertions "
        f"(ratio {result.transfer_ratio:.2f})"
    )
    for test_id, reason in result.skipped:
        print(f"  skipped nbtest_id_{test_id}: {reason}")
    print(f"wrote {out_path}")
    return 0


def cmd_eval_versions(args) -> int:
    cfg, from_file = _effective_config(args)
    _print_header("eval-versions", cfg, from_file, ("runs", "seed", "timeout", "jobs"))
    root = Path(args.root)
    if not root.is_dir():
        raise CliError(f"{root} is not a directory")
    executor = _executor_cmd(cfg)
    workspace = Path(args.out) if args.out else root / "eval.work"

    reports: dict[str, list] = {}
    for nb_dir in sorted(p for p in root.iterdir() if p.is_dir() and p != workspace):
        versions = sorted(p for p in nb_dir.iterdir() if p.is_dir())
        if not versions:
            continue
        reports[nb_dir.name] = []
        for ver_dir in versions:
            candidates = sorted(ver_dir.glob("*.nbtest.ipynb"))
            if not candidates:
                print(f"warning: {ver_dir} has no test notebook", file=sys.stderr)
                continue
            nb_path = candidates[0]
            run_cfg = RunConfig(
                workspace=workspace / nb_dir.name / ver_dir.name,
                iterations=cfg["runs"],
                timeout_seconds=cfg["timeout"],
                parallelism=cfg["jobs"],
                base_seed=cfg["seed"],
            )
            rep = run_tests(
                read_notebook(nb_path),
                run_cfg,
                executor,
                source_dir=ver_dir,
                notebook_name=nb_path.name,
            )
            reports[nb_dir.name].append(rep)
            verdict = "killed" if any(
                a.evaluated and a.pass_rate < 1.0 for a in rep.assertions
            ) else "survived"
            print(f"  {nb_dir.name}/{ver_dir.name}: {verdict}")

    evaluation = evaluate_versions(reports)
    m = evaluation.metrics
    print(
        f"versions killed: {m.versions_killed}/{m.versions_total} (K_V={m.k_v:.4f})"
    )
    print(
        f"notebooks fully killed: {m.notebooks_all_killed}/{m.notebooks_total} "
        f"(K_N={m.k_n:.4f}); any-version kills: {m.notebooks_any_killed}"
    )
    for name, idx in evaluation.unassessed:
        print(f"  {name} version {idx}: no assertions evaluated", file=sys.stderr)
    if args.report:
        Path(args.report).write_text(
            json.dumps(evaluation.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        print(f"wrote {args.report}")
    return 0


def cmd_strip(args) -> int:
    nb = read_notebook(args.notebook)
    out_path = Path(args.out) if args.out else Path(args.notebook)
    write_notebook(strip_generated(nb), out_path)
    print(f"wrote {out_path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_exec_flags(p: argparse.ArgumentParser, runs_flag: bool) -> None:
    if runs_flag:
        p.add_argument("--runs", type=int, help="repeated executions (default 30)")
    p.add_argument("--timeout", type=float, help="per-run timeout in seconds")
    p.add_argument("--jobs", type=int, help="parallel runs")
    p.add_argument("--seed", type=int, help="base seed; run i uses seed+i")
    p.add_argument("--executor", help="command that executes a notebook")
    p.add_argument("--out", help="workspace directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbtest", description="regression test generation for ML notebooks"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="list trackable properties")
    p.add_argument("notebook")
    p.add_argument("--catalog", help="extra API catalog file")
    p.add_argument("--report", help="write the analysis as JSON")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("gen", help="generate a test notebook")
    p.add_argument("notebook")
    p.add_argument("--catalog")
    p.add_argument("--iterations", type=int, help="generation runs (default 30)")
    p.add_argument("--confidence", type=float, help="bound confidence (default 0.99)")
    _add_exec_flags(p, runs_flag=False)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("run", help="execute a generated test notebook")
    p.add_argument("notebook")
    p.add_argument("--format", choices=sorted(RENDERERS), help="report format")
    p.add_argument("--report", help="also write the report to this file")
    _add_exec_flags(p, runs_flag=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("mutate", help="evaluate assertions against injected faults")
    p.add_argument("notebook", help="generated test notebook")
    p.add_argument("--catalog")
    p.add_argument("--operators", help="comma separated operator names")
    p.add_argument("--max-per-op", type=int, default=4)
    p.add_argument("--manifest", help="generation manifest for kill attribution")
    p.add_argument("--report", help="write mutant results as JSON")
    _add_exec_flags(p, runs_flag=True)
    p.set_defaults(fn=cmd_mutate)

    p = sub.add_parser("transfer", help="carry assertions to a new notebook version")
    p.add_argument("--from", dest="src", required=True, help="generated test notebook")
    p.add_argument("--to", dest="dst", required=True, help="new notebook version")
    p.add_argument("--out", help="output path (default <to>.nbtest.ipynb)")
    p.set_defaults(fn=cmd_transfer)

    p = sub.add_parser("eval-versions", help="grade assertions across real versions")
    p.add_argument("root", help="directory: <notebook>/<version>/<tests>.nbtest.ipynb")
    p.add_argument("--report", help="write metrics as JSON")
    _add_exec_flags(p, runs_flag=True)
    p.set_defaults(fn=cmd_eval_versions)

    p = sub.add_parser("strip", help="remove generated lines from a notebook")
    p.add_argument("notebook")
    p.add_argument("--out", help="output path (default: in place)")
    p.set_defaults(fn=cmd_strip)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NotebookError, CatalogSchemaError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InstrumentationConflict as exc:
        print(f"error: analysis no longer matches the notebook: {exc}", file=sys.stderr)
        return 2
    except ExecutorUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
