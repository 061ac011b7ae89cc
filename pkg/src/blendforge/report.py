"""Report rendering: delimited CSV tables plus matplotlib figures on disk.

The CLI's report path drops everything a planner reviews offline into one
directory: per-blend revenue and quality rows, costs and cashflows,
violations, slacks, contribution shares, and figures for the allocation
board, quality vs. range bands, cashflow, and wash utilization.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analytics import AnalyticsReport
from .evaluate import EvaluationReport
from .optimizer import OptimizeResult
from .plan import BlendPlan
from .types import Scenario


def _write_csv(path: Path, headers: list[str], rows: list[list]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        writer.writerows(rows)
    return path


def write_tables(
    scenario: Scenario,
    report: EvaluationReport,
    out_dir: Path,
    analytics: AnalyticsReport | None = None,
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    attr_codes = scenario.registry.codes()
    written.append(
        _write_csv(
            out_dir / "product_periods.csv",
            ["product_id", "period", "tonnes", "in_spec", "gross_revenue", "adjustment_revenue"]
            + attr_codes,
            [
                [
                    r.product_id,
                    r.period,
                    r.tonnes,
                    int(r.in_spec),
                    r.gross_revenue,
                    r.adjustment_revenue,
                ]
                + [r.blended_quality.get(code, "") for code in attr_codes]
                for r in report.per_product_period
            ],
        )
    )
    written.append(
        _write_csv(
            out_dir / "costs.csv",
            ["period", "haul", "wash", "rehandle", "net_cashflow", "wash_utilization"],
            [
                [
                    p,
                    c.haul,
                    c.wash,
                    c.rehandle,
                    report.net_cashflows[p],
                    report.kpis.wash_utilization[p],
                ]
                for p, c in enumerate(report.costs)
            ],
        )
    )
    written.append(
        _write_csv(
            out_dir / "violations.csv",
            ["code", "period", "magnitude"],
            [[v.code, v.period, v.magnitude] for v in report.violations],
        )
    )
    written.append(
        _write_csv(
            out_dir / "kpis.csv",
            ["total_sold_tonnes", "avg_revenue_per_tonne", "total_revenue", "npv"],
            [
                [
                    report.kpis.total_sold_tonnes,
                    report.kpis.avg_revenue_per_tonne,
                    report.total_revenue,
                    report.npv,
                ]
            ],
        )
    )
    if analytics is not None:
        written.append(
            _write_csv(
                out_dir / "slacks.csv",
                ["code", "period", "slack"],
                [[s.code, s.period, s.slack] for s in analytics.slacks],
            )
        )
        contribution_rows = []
        for (product_id, period), rows in sorted(analytics.contributions.items()):
            for row in rows:
                for code, value in sorted(row.contributions.items()):
                    contribution_rows.append(
                        [product_id, period, row.rom_id, row.share, code, value]
                    )
        written.append(
            _write_csv(
                out_dir / "contributions.csv",
                ["product_id", "period", "rom_id", "share", "attribute", "contribution"],
                contribution_rows,
            )
        )
    return written


def _allocation_figure(scenario: Scenario, plan: BlendPlan, path: Path) -> Path:
    cells = plan.cells()
    columns = sorted({(c[1], c[0]) for c in cells})
    rom_ids = [r.id for r in scenario.roms]
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(columns) + 2), 4))
    bottoms = [0.0] * len(columns)
    for rom_id in rom_ids:
        heights = [cells.get((period, product, rom_id), 0) for product, period in columns]
        if not any(heights):
            continue
        ax.bar(range(len(columns)), heights, bottom=bottoms, label=rom_id)
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax.set_xticks(range(len(columns)))
    ax.set_xticklabels([f"{product}\np{period}" for product, period in columns], fontsize=8)
    ax.set_ylabel("lots")
    ax.set_title("Lot allocation by ROM")
    if any(bottoms):
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _quality_figure(scenario: Scenario, report: EvaluationReport, path: Path) -> Path:
    pairs = []
    for product in scenario.products:
        for code in sorted(product.quality_range):
            pairs.append((product, code))
    if not pairs:
        pairs = [(product, None) for product in scenario.products]
    ncols = min(3, max(1, len(pairs)))
    nrows = (len(pairs) + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4 * ncols, 2.8 * nrows), squeeze=False
    )
    for index, (product, code) in enumerate(pairs):
        ax = axes[index // ncols][index % ncols]
        periods = list(range(scenario.horizon_periods))
        if code is not None:
            rng = product.quality_range[code]
            ax.fill_between(periods, rng.min, rng.max, alpha=0.15, color="tab:green")
            adj = product.adjustments.get(code)
            if adj is not None:
                ax.axhline(adj.target, color="tab:green", linestyle=":", linewidth=1)
            values = []
            for period in periods:
                row = report.row(product.id, period)
                values.append(
                    row.blended_quality.get(code) if row is not None else None
                )
            xs = [p for p, v in zip(periods, values) if v is not None]
            ys = [v for v in values if v is not None]
            flags = [
                p
                for p, v in zip(periods, values)
                if v is not None and not rng.contains(v)
            ]
            ax.plot(xs, ys, marker="o", color="tab:blue")
            if flags:
                ax.plot(
                    flags,
                    [values[p] for p in flags],
                    linestyle="none",
                    marker="x",
                    color="tab:red",
                    markersize=10,
                )
            ax.set_title(f"{product.id}: {code}", fontsize=9)
        ax.set_xlabel("period", fontsize=8)
        ax.tick_params(labelsize=8)
    for index in range(len(pairs), nrows * ncols):
        axes[index // ncols][index % ncols].set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _cashflow_figure(report: EvaluationReport, path: Path) -> Path:
    periods = list(range(len(report.net_cashflows)))
    revenue = [
        sum(
            r.gross_revenue + r.adjustment_revenue
            for r in report.per_product_period
            if r.period == p
        )
        for p in periods
    ]
    costs = [c.total() for c in report.costs]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.3
    ax.bar([p - width for p in periods], revenue, width, label="revenue")
    ax.bar(periods, [-c for c in costs], width, label="costs")
    ax.bar([p + width for p in periods], report.net_cashflows, width, label="net")
    ax.axhline(0, color="black", linewidth=0.8)
    ax.set_xlabel("period")
    ax.set_ylabel("money")
    ax.set_title(f"Cashflow (NPV {report.npv:,.0f})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _utilization_figure(report: EvaluationReport, path: Path) -> Path:
    periods = list(range(len(report.kpis.wash_utilization)))
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar(periods, report.kpis.wash_utilization, color="tab:purple")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("period")
    ax.set_ylabel("wash utilization")
    ax.set_title("Wash plant utilization")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _trace_figure(result: OptimizeResult, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3))
    if result.trace:
        xs = [i for i, _ in result.trace]
        ys = [v for _, v in result.trace]
        ax.step(xs, ys, where="post")
    ax.set_xlabel("evaluations")
    ax.set_ylabel("incumbent objective")
    ax.set_title("Search trace")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_figures(
    scenario: Scenario,
    plan: BlendPlan,
    report: EvaluationReport,
    out_dir: Path,
    result: OptimizeResult | None = None,
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        _allocation_figure(scenario, plan, out_dir / "allocation.png"),
        _quality_figure(scenario, report, out_dir / "quality.png"),
        _cashflow_figure(report, out_dir / "cashflow.png"),
    ]
    if scenario.logistics.wash_capacity_tonnes is not None:
        written.append(_utilization_figure(report, out_dir / "utilization.png"))
    if result is not None:
        written.append(_trace_figure(result, out_dir / "trace.png"))
    return written


def write_report_bundle(
    scenario: Scenario,
    plan: BlendPlan,
    report: EvaluationReport,
    out_dir: str | Path,
    analytics: AnalyticsReport | None = None,
    result: OptimizeResult | None = None,
) -> list[Path]:
    """CSV tables and figures side by side in one directory."""
    out = Path(out_dir)
    return write_tables(scenario, report, out, analytics) + write_figures(
        scenario, plan, report, out, result
    )
