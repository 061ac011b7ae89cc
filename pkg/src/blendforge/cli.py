"""Command-line entry points: count, optimize, compare, analyze, report,
and serve.

Human-readable tables go to stdout; machine documents are written only via
--out style options, so results stay pipeable and diffable. Exit codes:
0 success, 1 infeasible result, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .analytics import analytics_to_doc, build_report
from .errors import BlendforgeError, DocumentError, RunLogError
from .evaluate import evaluate_plan
from .optimizer import STRATEGY_NAMES, Strategy, compare_strategies, optimize
from .plan import BlendPlan
from .report import write_report_bundle
from .scenario_io import (
    canonical_bytes,
    load_plan,
    load_scenario,
    report_to_doc,
    save_plan,
)
from .space import SpaceSummary, count_blend_space, count_cut_combinations
from .types import Scenario

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3


def _read_scenario(path: str) -> Scenario:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        click.echo(f"cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    try:
        return load_scenario(data)
    except DocumentError as exc:
        click.echo(f"invalid scenario {path}:", err=True)
        for issue in exc.issues:
            click.echo(f"  [{issue.code}] {issue.path}: {issue.message}", err=True)
        sys.exit(EXIT_VALIDATION)


def _read_plan(path: str) -> BlendPlan:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        click.echo(f"cannot read {path}: {exc}", err=True)
        sys.exit(EXIT_IO)
    try:
        return load_plan(data)
    except DocumentError as exc:
        click.echo(f"invalid plan {path}:", err=True)
        for issue in exc.issues:
            click.echo(f"  [{issue.code}] {issue.path}: {issue.message}", err=True)
        sys.exit(EXIT_VALIDATION)


def _write_bytes(path: str, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        click.echo(f"cannot write {path}: {exc}", err=True)
        sys.exit(EXIT_IO)


def _table(headers: list[str], rows: list[list]) -> str:
    cells = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = []
    for index, row in enumerate(cells):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if index == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


@click.group()
def main():
    """Blend planning: count, optimize, compare, analyze, report, serve."""


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option(
    "--cut-grid",
    default="",
    help="Comma-separated cut-point densities to include in the space count.",
)
def count(scenario_path: str, cut_grid: str):
    """Print the exact blend-space size and its order of magnitude."""
    scenario = _read_scenario(scenario_path)
    grid = [float(x) for x in cut_grid.split(",") if x.strip()]
    total = count_blend_space(SpaceSummary.from_scenario(scenario))
    if grid:
        total *= count_cut_combinations(scenario, grid)
    click.echo(f"{total} ({total:.2e})")


def _parse_strategy(name: str, seed: int, budget: int, restarts: int) -> Strategy:
    parameters = {"budget_evaluations": budget, "restarts": restarts, "seed": seed}
    strategy = Strategy(name, parameters)
    try:
        strategy.validate()
    except ValueError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_VALIDATION)
    return strategy


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--strategy", "strategy_name", default="anneal", type=click.Choice(STRATEGY_NAMES))
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--budget", default=20000, type=int, show_default=True)
@click.option("--restarts", default=4, type=int, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(), help="Write the plan document here.")
@click.option("--report", "report_path", default=None, type=click.Path(), help="Write the evaluation report document here.")
@click.option("--figures", "figures_dir", default=None, type=click.Path(), help="Render report CSVs and figures into this directory.")
def optimize_cmd(scenario_path, strategy_name, seed, budget, restarts, out_path, report_path, figures_dir):
    """Optimize a scenario and write the plan and report."""
    scenario = _read_scenario(scenario_path)
    strategy = _parse_strategy(strategy_name, seed, budget, restarts)
    result = optimize(scenario, strategy)
    click.echo(
        f"strategy {strategy_name}  objective {result.objective_value:,.2f}  "
        f"feasible {result.feasible}  evaluations {result.evaluations}"
    )
    rows = [
        [r.product_id, r.period, f"{r.tonnes:,.0f}", "yes" if r.in_spec else "NO",
         f"{r.gross_revenue + r.adjustment_revenue:,.2f}"]
        for r in result.report.per_product_period
    ]
    if rows:
        click.echo(_table(["product", "period", "tonnes", "in spec", "revenue"], rows))
    if result.report.violations:
        click.echo("violations:")
        for v in result.report.violations:
            click.echo(f"  {v.code} period {v.period} magnitude {v.magnitude:g}")
    if out_path:
        _write_bytes(out_path, save_plan(result.plan))
    if report_path:
        _write_bytes(
            report_path,
            canonical_bytes({"report": report_to_doc(result.report), "schema_version": 1}),
        )
    if figures_dir:
        analytics = build_report(scenario, result.plan)
        write_report_bundle(
            scenario, result.plan, result.report, figures_dir, analytics, result
        )
        click.echo(f"report bundle written to {figures_dir}")
    sys.exit(EXIT_OK if result.feasible else EXIT_INFEASIBLE)


main.add_command(optimize_cmd, name="optimize")


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--strategies", "strategy_names", required=True, help="Comma-separated strategy names.")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--budget", default=20000, type=int, show_default=True)
@click.option("--restarts", default=4, type=int, show_default=True)
def compare(scenario_path, strategy_names, seed, budget, restarts):
    """Run several strategies on one scenario and print the ranking."""
    scenario = _read_scenario(scenario_path)
    names = [n.strip() for n in strategy_names.split(",") if n.strip()]
    if len(names) < 2:
        click.echo("need at least 2 strategies to compare", err=True)
        sys.exit(EXIT_VALIDATION)
    strategies = [_parse_strategy(name, seed, budget, restarts) for name in names]
    rows = compare_strategies(scenario, strategies)
    click.echo(
        _table(
            ["rank", "strategy", "objective", "feasible"],
            [
                [i + 1, row.name, f"{row.objective:,.2f}", "yes" if row.feasible else "no"]
                for i, row in enumerate(rows)
            ],
        )
    )


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--plan", "plan_path", required=True, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path(), help="Write the analytics document here.")
def analyze(scenario_path, plan_path, out_path):
    """Evaluate a plan and print its analytics; exit 1 if infeasible."""
    scenario = _read_scenario(scenario_path)
    plan = _read_plan(plan_path)
    try:
        report = evaluate_plan(scenario, plan)
    except BlendforgeError as exc:
        click.echo(f"plan does not bind to scenario: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    analytics = build_report(scenario, plan)
    click.echo(f"objective (npv) {report.npv:,.2f}  revenue {report.total_revenue:,.2f}")
    rows = [
        [r.product_id, r.period, f"{r.tonnes:,.0f}", "yes" if r.in_spec else "NO"]
        for r in report.per_product_period
    ]
    if rows:
        click.echo(_table(["product", "period", "tonnes", "in spec"], rows))
    for (product_id, period), contribution in sorted(analytics.contributions.items()):
        click.echo(f"contributions {product_id} period {period}:")
        click.echo(
            _table(
                ["rom", "share", "tonnes"],
                [[c.rom_id, f"{c.share:.3f}", f"{c.tonnes:,.0f}"] for c in contribution],
            )
        )
    negative = [s for s in analytics.slacks if s.slack < -1e-9]
    if negative:
        click.echo("binding or violated constraints:")
        click.echo(
            _table(
                ["constraint", "period", "slack"],
                [[s.code, s.period, f"{s.slack:,.1f}"] for s in negative],
            )
        )
    if report.violations:
        click.echo("violations:")
        for v in report.violations:
            click.echo(f"  {v.code} period {v.period} magnitude {v.magnitude:g}")
    if out_path:
        _write_bytes(
            out_path,
            canonical_bytes({"analytics": analytics_to_doc(analytics), "schema_version": 1}),
        )
    sys.exit(EXIT_OK if not report.violations else EXIT_INFEASIBLE)


@main.command(name="report")
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--plan", "plan_path", required=True, type=click.Path())
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
def report_cmd(scenario_path, plan_path, out_dir):
    """Render the CSV tables and figures for a plan into a directory."""
    scenario = _read_scenario(scenario_path)
    plan = _read_plan(plan_path)
    try:
        report = evaluate_plan(scenario, plan)
    except BlendforgeError as exc:
        click.echo(f"plan does not bind to scenario: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    analytics = build_report(scenario, plan)
    try:
        written = write_report_bundle(scenario, plan, report, out_dir, analytics)
    except OSError as exc:
        click.echo(f"cannot write report bundle: {exc}", err=True)
        sys.exit(EXIT_IO)
    for path in written:
        click.echo(str(path))
    sys.exit(EXIT_OK if not report.violations else EXIT_INFEASIBLE)


@main.command()
@click.option("--port", default=None, type=int, help="Defaults to $BLENDFORGE_PORT or 8080.")
@click.option("--workers", default=4, type=int, show_default=True, help="Optimization worker threads.")
@click.option("--runlog", "runlog_path", default="blendforge.runlog", show_default=True, type=click.Path())
@click.option("--static", "static_dir", default=None, type=click.Path(), help="Serve a planner UI build from this directory.")
def serve(port, workers, runlog_path, static_dir):
    """Start the HTTP service."""
    import uvicorn

    from .server import create_app, resolve_port

    app = create_app(workers=workers, runlog_path=runlog_path, static_dir=static_dir)
    try:
        uvicorn.run(app, host="127.0.0.1", port=resolve_port(port), log_level="warning")
    except RunLogError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_IO)


if __name__ == "__main__":
    main()
