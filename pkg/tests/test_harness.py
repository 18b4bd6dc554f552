"""Harness: timed search records, result-file round trips, trust-nothing
evaluation, step-level accuracy, and report rendering."""

import json

import pytest

from stepsynth import backends, harness, taskgen
from stepsynth.backends import EnumBackend, OracleBackend
from stepsynth.errors import MismatchError
from stepsynth.harness import (
    EvalReport, ReportRow, RESULT_FIELDS, SPLIT_COLUMNS, evaluate,
    merge_reports, read_results, report_json, report_table, run_searches,
    single_step_accuracy, write_results,
)
from stepsynth.search import Proposal, SearchConfig


@pytest.fixture(scope="module")
def rf_tasks():
    return taskgen.build_dataset("rf", "NONE", "train", 3, 0)


@pytest.fixture(scope="module")
def dc_tasks():
    return taskgen.build_dataset("dc", "NONE", "train", 3, 500)


def oracle_pair(task):
    trace = taskgen.decompose(task)
    return (OracleBackend(trace, "subgoal"),
            OracleBackend(trace, "synthesizer"))


def oracle_combined(task):
    return OracleBackend(taskgen.decompose(task), "combined")


class _Silent:
    """A backend that never proposes anything."""

    def __init__(self, role="combined"):
        self.role = role

    def propose(self, spec, k):
        return []


class _FixedText:
    def __init__(self, role, text):
        self.role = role
        self.text = text

    def propose(self, spec, k):
        return [Proposal(self.text, -1.0)]


class TestRunSearches:
    def test_oracle_solves_and_schema(self, rf_tasks):
        records = run_searches(rf_tasks, "exedec", oracle_pair,
                               SearchConfig())
        assert len(records) == len(rf_tasks)
        for task, record in zip(rf_tasks, records):
            assert tuple(record) == RESULT_FIELDS
            assert record["seed"] == task.seed
            assert record["solved"] is True
            assert record["score"] == 0.0
            assert record["steps"] == len(taskgen.decompose(task).steps)
            assert record["wall_ms"] > 0

    def test_nosubgoal_mode(self, dc_tasks):
        records = run_searches(dc_tasks, "nosubgoal", oracle_combined,
                               SearchConfig())
        assert all(r["solved"] for r in records)

    def test_failed_search_record(self, rf_tasks):
        records = run_searches(rf_tasks[:1], "nosubgoal",
                               lambda task: _Silent(), SearchConfig())
        record = records[0]
        assert record["solved"] is False
        assert record["program"] is None
        assert record["score"] is None
        assert record["steps"] is None
        assert record["wall_ms"] >= 0

    def test_unknown_mode(self, rf_tasks):
        with pytest.raises(ValueError):
            run_searches(rf_tasks, "greedy", oracle_pair, SearchConfig())


class TestResultsIO:
    def test_round_trip(self, tmp_path, rf_tasks):
        records = run_searches(rf_tasks, "exedec", oracle_pair,
                               SearchConfig())
        path = tmp_path / "results.jsonl"
        write_results(path, records)
        assert read_results(path) == records

    def test_write_filters_extra_keys(self, tmp_path):
        record = {k: None for k in RESULT_FIELDS}
        record.update(seed=1, solved=False, wall_ms=2.0, debug="drop me")
        path = tmp_path / "results.jsonl"
        write_results(path, [record])
        line = json.loads(path.read_text().strip())
        assert "debug" not in line
        assert tuple(line) == RESULT_FIELDS

    def test_read_skips_blank_lines(self, tmp_path):
        path = tmp_path / "results.jsonl"
        record = dict(zip(RESULT_FIELDS, [7, False, None, None, None, 1.0]))
        path.write_text("\n" + json.dumps(record) + "\n\n")
        assert read_results(path) == [record]

    def test_read_rejects_non_json(self, tmp_path):
        path = tmp_path / "results.jsonl"
        path.write_text("not json\n")
        with pytest.raises(MismatchError):
            read_results(path)

    def test_read_rejects_missing_field(self, tmp_path):
        path = tmp_path / "results.jsonl"
        path.write_text('{"seed": 1, "solved": true}\n')
        with pytest.raises(MismatchError, match="lacks"):
            read_results(path)


def write_pair(tmp_path, tasks, records, stem="run"):
    dataset = tmp_path / f"{stem}-tasks.jsonl"
    results = tmp_path / f"{stem}-results.jsonl"
    taskgen.write_tasks(dataset, tasks)
    write_results(results, records)
    return results, dataset


class TestEvaluate:
    def test_all_solved(self, tmp_path, rf_tasks):
        records = run_searches(rf_tasks, "exedec", oracle_pair,
                               SearchConfig())
        report = evaluate(*write_pair(tmp_path, rf_tasks, records))
        (row,) = report.rows
        assert (row.domain, row.split) == ("rf", "NONE")
        assert row.solved == row.total == len(rf_tasks)
        assert row.success_rate == 1.0
        assert row.mean_wall_ms > 0
        assert row.flagged == ()

    def test_empty_results_count_unsolved(self, tmp_path, rf_tasks):
        report = evaluate(*write_pair(tmp_path, rf_tasks, []))
        (row,) = report.rows
        assert row.solved == 0
        assert row.total == len(rf_tasks)
        assert row.mean_wall_ms is None

    def test_partial_results(self, tmp_path, rf_tasks):
        records = run_searches(rf_tasks, "exedec", oracle_pair,
                               SearchConfig())
        results, dataset = write_pair(tmp_path, rf_tasks, records[:1])
        (row,) = evaluate(results, dataset).rows
        assert row.solved == 1
        assert row.total == len(rf_tasks)

    def test_false_claim_is_flagged(self, tmp_path, rf_tasks):
        records = run_searches(rf_tasks, "exedec", oracle_pair,
                               SearchConfig())
        records[0] = dict(records[0], program="Const('@')")
        (row,) = evaluate(*write_pair(tmp_path, rf_tasks, records)).rows
        assert row.solved == len(rf_tasks) - 1
        assert row.flagged == (rf_tasks[0].seed,)

    def test_unparseable_claim_is_flagged(self, tmp_path, dc_tasks):
        records = run_searches(dc_tasks, "nosubgoal", oracle_combined,
                               SearchConfig())
        records[1] = dict(records[1], program="x1 = Frobnicate x0")
        records[2] = dict(records[2], program=None)
        (row,) = evaluate(*write_pair(tmp_path, dc_tasks, records)).rows
        assert row.solved == len(dc_tasks) - 2
        assert row.flagged == tuple(sorted(t.seed for t in dc_tasks[1:]))

    def test_order_invariance(self, tmp_path, rf_tasks):
        records = run_searches(rf_tasks, "exedec", oracle_pair,
                               SearchConfig())
        forward = evaluate(*write_pair(tmp_path, rf_tasks, records, "fwd"))
        reverse = evaluate(*write_pair(tmp_path, rf_tasks, records[::-1],
                                       "rev"))
        assert forward.rows == reverse.rows

    def test_unknown_seed_rejected(self, tmp_path, rf_tasks):
        record = dict(zip(RESULT_FIELDS,
                          [999, False, None, None, None, 1.0]))
        with pytest.raises(MismatchError, match="no task"):
            evaluate(*write_pair(tmp_path, rf_tasks, [record]))

    def test_duplicate_result_rejected(self, tmp_path, rf_tasks):
        records = run_searches(rf_tasks[:1], "exedec", oracle_pair,
                               SearchConfig())
        with pytest.raises(MismatchError, match="duplicate"):
            evaluate(*write_pair(tmp_path, rf_tasks, records * 2))

    def test_duplicate_dataset_seed_rejected(self, tmp_path, rf_tasks):
        with pytest.raises(MismatchError, match="share seed"):
            evaluate(*write_pair(tmp_path, [rf_tasks[0]] * 2, []))

    def test_splits_grouped_separately(self, tmp_path):
        none = taskgen.build_dataset("rf", "NONE", "train", 2, 0)
        length = taskgen.build_dataset("rf", "LENGTH", "train", 2, 9000)
        tasks = none + length
        records = run_searches(tasks, "exedec", oracle_pair, SearchConfig())
        report = evaluate(*write_pair(tmp_path, tasks, records))
        assert [(r.domain, r.split) for r in report.rows] == [
            ("rf", "LENGTH"), ("rf", "NONE")]
        assert report.gen_avg("rf") == 1.0  # NONE is excluded from the mean


class TestSingleStepAccuracy:
    def test_oracle_is_perfect(self, rf_tasks, dc_tasks):
        tasks = rf_tasks + dc_tasks
        for role in ("subgoal", "synthesizer", "combined"):
            acc = single_step_accuracy(
                tasks,
                lambda t, role=role: OracleBackend(taskgen.decompose(t),
                                                   role))
            assert acc == 1.0

    def test_enum_behavior_match(self, dc_tasks):
        assert single_step_accuracy(dc_tasks,
                                    EnumBackend(role="synthesizer")) == 1.0

    def test_silent_backend_scores_zero(self, rf_tasks):
        assert single_step_accuracy(rf_tasks, _Silent()) == 0.0

    def test_wrong_subgoal_text_scores_zero(self, rf_tasks):
        backend = _FixedText("subgoal", "never\nthe\nanswer")
        assert single_step_accuracy(rf_tasks, backend) == 0.0

    def test_unparseable_proposal_scores_zero(self, dc_tasks):
        backend = _FixedText("combined", "x1 = Frobnicate x0")
        assert single_step_accuracy(dc_tasks, backend) == 0.0

    def test_no_steps_raises(self):
        with pytest.raises(ValueError):
            single_step_accuracy([], _Silent())


def row(domain, split, solved, total, wall=1.0):
    return ReportRow(domain, split, solved, total, wall, ())


class TestMergeReports:
    def test_rows_sorted_and_labeled(self):
        a = EvalReport((row("rf", "NONE", 1, 2),))
        b = EvalReport((row("dc", "LENGTH", 3, 4),))
        merged = merge_reports([a, b], mode="exedec", backend="enum",
                               beam_size=5)
        assert [(r.domain, r.split) for r in merged.rows] == [
            ("dc", "LENGTH"), ("rf", "NONE")]
        assert (merged.mode, merged.backend, merged.beam_size) == (
            "exedec", "enum", 5)

    def test_collision_rejected(self):
        a = EvalReport((row("rf", "NONE", 1, 2),))
        with pytest.raises(MismatchError, match="NONE"):
            merge_reports([a, a])


class TestReports:
    def test_json_shape(self):
        report = EvalReport(
            (row("rf", "NONE", 2, 2), row("rf", "LENGTH", 1, 2)),
            mode="exedec", backend="oracle", beam_size=1,
            single_step={"subgoal": 1.0})
        out = report_json(report)
        assert out["mode"] == "exedec"
        assert out["gen_avg"] == {"rf": 0.5}
        assert out["single_step"] == {"subgoal": 1.0}
        by_split = {r["split"]: r for r in out["rows"]}
        assert by_split["NONE"]["success_rate"] == 1.0
        assert by_split["LENGTH"]["flagged"] == []
        assert json.loads(json.dumps(out)) == out

    def test_json_without_gen_splits(self):
        out = report_json(EvalReport((row("dc", "NONE", 0, 4),)))
        assert out["gen_avg"] == {"dc": None}
        assert "single_step" not in out

    def test_table_layout(self):
        report = EvalReport(
            (row("rf", "NONE", 2, 2), row("rf", "LENGTH", 1, 2),
             row("dc", "NONE", 1, 4)),
            mode="exedec", backend="enum", beam_size=3)
        table = report_table(report)
        lines = table.splitlines()
        assert lines[0].startswith("domain (exedec enum 3)")
        for split in SPLIT_COLUMNS:
            assert split in lines[0]
        assert lines[0].rstrip().endswith("GenAvg")
        assert all(line == line.rstrip() for line in lines)
        dc_line, rf_line = lines[1], lines[2]
        assert dc_line.split() == ["dc", "25.0", "-", "-", "-", "-", "-", "-"]
        assert rf_line.split() == ["rf", "100.0", "50.0", "-", "-", "-",
                                   "-", "50.0"]
        # Columns line up: each header label starts where its cells do.
        offset = lines[0].index("NONE")
        assert rf_line[offset:offset + 5] == "100.0"

    def test_table_without_labels(self):
        table = report_table(EvalReport((row("rf", "NONE", 1, 1),)))
        assert table.splitlines()[0].startswith("domain  ")


class TestEndToEnd:
    def test_searched_report_matches_hand_count(self, tmp_path, dc_tasks):
        records = run_searches(dc_tasks, "exedec", oracle_pair,
                               SearchConfig(beam_size=2))
        results, dataset = write_pair(tmp_path, dc_tasks, records)
        report = merge_reports([evaluate(results, dataset)],
                               mode="exedec", backend="oracle", beam_size=2)
        out = report_json(report)
        assert out["rows"][0]["solved"] == sum(
            1 for r in records if r["solved"])
        table = report_table(report)
        assert "dc" in table
