"""CLI behavior: outputs, exit codes, determinism, thin-wrapper law."""

from pathlib import Path

import pytest
from click.testing import CliRunner

from blendforge import Strategy, optimize, save_plan, save_scenario
from blendforge.cli import main
from toys import nfl_scenario, two_rom_toy

EXAMPLES = Path(__file__).resolve().parent.parent / "docs" / "examples"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.scenario"
    path.write_bytes(save_scenario(two_rom_toy()))
    return str(path)


class TestCount:
    def test_paper_example_exact_count(self, runner):
        result = runner.invoke(
            main, ["count", "--scenario", str(EXAMPLES / "paper-five-rom.scenario")]
        )
        assert result.exit_code == 0
        assert result.output.strip() == "21142762711876 (2.11e+13)"

    def test_empty_scenario_counts_one(self, runner, tmp_path):
        from toys import make_scenario

        path = tmp_path / "empty.scenario"
        path.write_bytes(save_scenario(make_scenario([], [])))
        result = runner.invoke(main, ["count", "--scenario", str(path)])
        assert result.exit_code == 0
        assert result.output.startswith("1 ")

    def test_invalid_file_exit_2(self, runner, tmp_path):
        path = tmp_path / "broken.scenario"
        path.write_text("{}")
        result = runner.invoke(main, ["count", "--scenario", str(path)])
        assert result.exit_code == 2

    def test_missing_file_exit_3(self, runner, tmp_path):
        result = runner.invoke(
            main, ["count", "--scenario", str(tmp_path / "absent.scenario")]
        )
        assert result.exit_code == 3


class TestOptimize:
    def test_same_seed_identical_output_files(self, runner, toy_file, tmp_path):
        outputs = []
        for round_index in range(2):
            out = tmp_path / f"plan{round_index}.plan"
            report = tmp_path / f"report{round_index}.json"
            result = runner.invoke(
                main,
                [
                    "optimize",
                    "--scenario", toy_file,
                    "--strategy", "anneal",
                    "--seed", "5",
                    "--budget", "2000",
                    "--restarts", "2",
                    "--out", str(out),
                    "--report", str(report),
                ],
            )
            assert result.exit_code == 0, result.output
            outputs.append((out.read_bytes(), report.read_bytes()))
        assert outputs[0] == outputs[1]

    def test_cli_equals_library(self, runner, toy_file, tmp_path):
        out = tmp_path / "plan.plan"
        result = runner.invoke(
            main,
            [
                "optimize",
                "--scenario", toy_file,
                "--strategy", "anneal",
                "--seed", "5",
                "--budget", "2000",
                "--restarts", "2",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        local = optimize(
            two_rom_toy(),
            Strategy("anneal", {"seed": 5, "budget_evaluations": 2000, "restarts": 2}),
        )
        assert out.read_bytes() == save_plan(local.plan)

    def test_infeasible_still_writes_and_exits_1(self, runner, tmp_path):
        from toys import make_product, make_rom, make_scenario

        rom = make_rom("r", {"ash": 9.0}, 2_000.0)
        product = make_product("p", 100.0, 10, {"ash": (0.0, 20.0)}, contract_lots=8)
        path = tmp_path / "starved.scenario"
        path.write_bytes(save_scenario(make_scenario([rom], [product])))
        out = tmp_path / "plan.plan"
        result = runner.invoke(
            main,
            [
                "optimize",
                "--scenario", str(path),
                "--strategy", "max-tonnes",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 1
        assert out.exists()


class TestCompare:
    def test_nfl_pair_prints_inverted_rankings(self, runner, tmp_path):
        first_lines = []
        for label, premium in (("a", True), ("b", False)):
            path = tmp_path / f"nfl-{label}.scenario"
            path.write_bytes(save_scenario(nfl_scenario(premium)))
            result = runner.invoke(
                main,
                [
                    "compare",
                    "--scenario", str(path),
                    "--strategies", "greedy-profit-first,avg-value,max-tonnes",
                ],
            )
            assert result.exit_code == 0, result.output
            ranked_first = result.output.splitlines()[2].split()[1]
            first_lines.append(ranked_first)
        assert first_lines[0] == "greedy-profit-first"
        assert first_lines[1] == "max-tonnes"

    def test_single_strategy_rejected(self, runner, toy_file):
        result = runner.invoke(
            main, ["compare", "--scenario", toy_file, "--strategies", "anneal"]
        )
        assert result.exit_code == 2


class TestAnalyze:
    def test_empty_plan_lists_contract_violations_exit_1(self, runner, tmp_path):
        from blendforge import BlendPlan
        from toys import make_product, make_rom, make_scenario

        rom = make_rom("r", {"ash": 9.0}, 30_000.0)
        product = make_product("p", 100.0, 10, {"ash": (0.0, 20.0)}, contract_lots=4)
        scenario_path = tmp_path / "c.scenario"
        scenario_path.write_bytes(save_scenario(make_scenario([rom], [product])))
        plan_path = tmp_path / "empty.plan"
        plan_path.write_bytes(save_plan(BlendPlan.empty()))
        result = runner.invoke(
            main, ["analyze", "--scenario", str(scenario_path), "--plan", str(plan_path)]
        )
        assert result.exit_code == 1
        assert "contract:p" in result.output

    def test_feasible_plan_exit_0(self, runner, toy_file, tmp_path):
        from blendforge import BlendPlan

        plan_path = tmp_path / "mix.plan"
        plan_path.write_bytes(
            save_plan(BlendPlan([(0, "blend-a", "sweet", 5), (0, "blend-a", "dirty", 5)]))
        )
        result = runner.invoke(
            main, ["analyze", "--scenario", toy_file, "--plan", str(plan_path)]
        )
        assert result.exit_code == 0, result.output
        assert "contributions" in result.output


class TestReportBundle:
    def test_writes_csvs_and_figures(self, runner, toy_file, tmp_path):
        from blendforge import BlendPlan

        plan_path = tmp_path / "mix.plan"
        plan_path.write_bytes(
            save_plan(BlendPlan([(0, "blend-a", "sweet", 5), (0, "blend-a", "dirty", 5)]))
        )
        out_dir = tmp_path / "bundle"
        result = runner.invoke(
            main,
            [
                "report",
                "--scenario", toy_file,
                "--plan", str(plan_path),
                "--out-dir", str(out_dir),
            ],
        )
        assert result.exit_code == 0, result.output
        names = {p.name for p in out_dir.iterdir()}
        assert {
            "product_periods.csv",
            "costs.csv",
            "violations.csv",
            "kpis.csv",
            "slacks.csv",
            "contributions.csv",
            "allocation.png",
            "quality.png",
            "cashflow.png",
        } <= names
        assert (out_dir / "product_periods.csv").read_text().startswith("product_id,")
