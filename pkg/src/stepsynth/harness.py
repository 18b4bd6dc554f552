"""Evaluation harness: timed searches over task files, trust-nothing
scoring of result files, and the step-level accuracy metric.

Result files are JSONL, one record per task:
    {"seed": ..., "solved": ..., "program": ..., "score": ...,
     "steps": ..., "wall_ms": ...}
Evaluation never believes a result line: every claimed solution is parsed
and re-executed against its task's examples before it counts.
"""

import json
import time
from dataclasses import dataclass

from . import dc_dsl, rf_dsl, taskgen
from .errors import ExecError, MismatchError, NoSolution, ParseError
from .search import (
    encode_subgoals, execute_subprogram, exedec_search, nosubgoal_search,
    parse_subprogram, update_specification, verify_program, with_subgoals)

RF, DC = "rf", "dc"

SPLIT_COLUMNS = ("NONE", "LENGTH", "CONCEPT_MIX", "CONCEPT_ORDER",
                 "NEW_OP", "OP_FUNCTIONALITY")
GENERALIZATION_SPLITS = SPLIT_COLUMNS[1:]

RESULT_FIELDS = ("seed", "solved", "program", "score", "steps", "wall_ms")


def _serialize_program(domain, program):
    return (rf_dsl.serialize(program) if domain == RF
            else dc_dsl.serialize(program))


def _parse_program(domain, text):
    return rf_dsl.parse(text) if domain == RF else dc_dsl.parse(text)


def run_search_on_task(task, mode, backend_factory, config):
    """One timed search; the clock wraps the search call and nothing else."""
    if mode == "exedec":
        subgoal, synthesizer = backend_factory(task)
        run = lambda: exedec_search(task.spec, subgoal, synthesizer, config)
    elif mode == "nosubgoal":
        combined = backend_factory(task)
        run = lambda: nosubgoal_search(task.spec, combined, config)
    else:
        raise ValueError(f"unknown search mode: {mode!r}")
    start = time.perf_counter()
    try:
        solutions = run()
    except NoSolution:
        solutions = None
    wall_ms = (time.perf_counter() - start) * 1000.0
    if not solutions:
        return {"seed": task.seed, "solved": False, "program": None,
                "score": None, "steps": None, "wall_ms": wall_ms}
    best = solutions[0]
    return {"seed": task.seed, "solved": True,
            "program": _serialize_program(task.domain, best.program),
            "score": best.score, "steps": best.n_steps, "wall_ms": wall_ms}


def run_searches(tasks, mode, backend_factory, config):
    return [run_search_on_task(task, mode, backend_factory, config)
            for task in tasks]


def write_results(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps({k: record[k] for k in RESULT_FIELDS}) + "\n")


def read_results(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise MismatchError(
                    f"{path}:{lineno}: not a JSON record: {exc}") from exc
            missing = [k for k in RESULT_FIELDS if k not in record]
            if missing:
                raise MismatchError(
                    f"{path}:{lineno}: record lacks {missing}")
            records.append(record)
    return records


@dataclass(frozen=True)
class ReportRow:
    domain: str
    split: str
    solved: int
    total: int
    mean_wall_ms: float | None
    flagged: tuple  # seeds whose claimed solution failed re-execution

    @property
    def success_rate(self):
        return self.solved / self.total


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    mode: str | None = None
    backend: str | None = None
    beam_size: int | None = None
    single_step: dict | None = None  # role -> accuracy, when measured

    def gen_avg(self, domain):
        """Mean success rate over the generalization splits present."""
        rates = [row.success_rate for row in self.rows
                 if row.domain == domain
                 and row.split in GENERALIZATION_SPLITS]
        return sum(rates) / len(rates) if rates else None

    @property
    def domains(self):
        return tuple(sorted({row.domain for row in self.rows}))


def evaluate(results_path, dataset_path):
    """Score one result file against its dataset.

    A task counts solved only when its claimed program parses and maps
    every example input to the example output. Result seeds must be unique
    and drawn from the dataset; tasks without a result line count unsolved.
    """
    tasks = taskgen.read_tasks(dataset_path)
    by_seed = {}
    for task in tasks:
        if task.seed in by_seed:
            raise MismatchError(
                f"{dataset_path}: two tasks share seed {task.seed}; "
                "evaluate one (domain, split, side) file at a time")
        by_seed[task.seed] = task
    records = {}
    for record in read_results(results_path):
        seed = record["seed"]
        if seed not in by_seed:
            raise MismatchError(
                f"result seed {seed} has no task in {dataset_path}")
        if seed in records:
            raise MismatchError(f"duplicate result for seed {seed}")
        records[seed] = record
    groups = {}
    for seed, task in by_seed.items():
        stats = groups.setdefault((task.domain, task.split),
                                  {"solved": 0, "total": 0, "walls": [],
                                   "flagged": []})
        stats["total"] += 1
        record = records.get(seed)
        if record is None:
            continue
        stats["walls"].append(float(record["wall_ms"]))
        if not record["solved"]:
            continue
        if _reexecutes(task, record["program"]):
            stats["solved"] += 1
        else:
            stats["flagged"].append(task.seed)
    rows = []
    for (domain, split), stats in sorted(groups.items()):
        walls = stats["walls"]
        rows.append(ReportRow(
            domain, split, stats["solved"], stats["total"],
            sum(walls) / len(walls) if walls else None,
            tuple(sorted(stats["flagged"]))))
    return EvalReport(tuple(rows))


def _reexecutes(task, program_text):
    if not isinstance(program_text, str):
        return False
    try:
        program = _parse_program(task.domain, program_text)
    except ParseError:
        return False
    return verify_program(task.domain, program, task.spec)


def single_step_accuracy(tasks, backend):
    """Fraction of ground-truth trace steps where the top-1 proposal is
    right: texts must match exactly for the subgoal role, behavior must
    match for the synthesizer and combined roles.

    backend is an instance, or a callable task -> instance for backends
    built per task (the oracle).
    """
    make = backend if callable(backend) else (lambda task: backend)
    hits = 0
    total = 0
    for task in tasks:
        instance = make(task)
        role = instance.role
        trace = taskgen.decompose(task)
        spec = task.spec
        for step in trace.steps:
            total += 1
            if role == "subgoal":
                proposals = instance.propose(spec, 1)
                want = encode_subgoals(spec.domain, step.subgoals)
                hits += bool(proposals) and proposals[0].text == want
            else:
                view = (with_subgoals(spec, step.subgoals)
                        if role == "synthesizer" else spec)
                proposals = instance.propose(view, 1)
                if proposals:
                    try:
                        sub = parse_subprogram(view, proposals[0].text)
                        hits += (execute_subprogram(spec, sub)
                                 == list(step.subgoals))
                    except (ParseError, ExecError):
                        pass
            spec = update_specification(spec, step.subgoals)
    if total == 0:
        raise ValueError("no trace steps to score")
    return hits / total


def merge_reports(reports, mode=None, backend=None, beam_size=None,
                  single_step=None):
    """One report from several evaluate() calls; (domain, split) rows must
    not collide."""
    rows = []
    seen = set()
    for report in reports:
        for row in report.rows:
            key = (row.domain, row.split)
            if key in seen:
                raise MismatchError(f"two result files cover {key}")
            seen.add(key)
            rows.append(row)
    return EvalReport(tuple(sorted(rows, key=lambda r: (r.domain, r.split))),
                      mode, backend, beam_size, single_step)


def report_json(report):
    out = {
        "mode": report.mode,
        "backend": report.backend,
        "beam_size": report.beam_size,
        "rows": [{
            "domain": row.domain,
            "split": row.split,
            "solved": row.solved,
            "total": row.total,
            "success_rate": row.success_rate,
            "mean_wall_ms": row.mean_wall_ms,
            "flagged": list(row.flagged),
        } for row in report.rows],
        "gen_avg": {domain: report.gen_avg(domain)
                    for domain in report.domains},
    }
    if report.single_step is not None:
        out["single_step"] = dict(report.single_step)
    return out


def report_table(report):
    """Aligned success-rate table: one row per domain, one column per
    split, plus the mean over the five generalization splits."""
    label = " ".join(str(part) for part in
                     (report.mode, report.backend, report.beam_size)
                     if part is not None)
    header = ["domain" + (f" ({label})" if label else "")]
    header += list(SPLIT_COLUMNS) + ["GenAvg"]
    by_cell = {(row.domain, row.split): row for row in report.rows}
    lines = [header]
    for domain in report.domains:
        cells = [domain]
        for split in SPLIT_COLUMNS:
            row = by_cell.get((domain, split))
            cells.append("-" if row is None
                         else f"{row.success_rate * 100:.1f}")
        avg = report.gen_avg(domain)
        cells.append("-" if avg is None else f"{avg * 100:.1f}")
        lines.append(cells)
    widths = [max(len(line[i]) for line in lines)
              for i in range(len(header))]
    rendered = []
    for line in lines:
        rendered.append("  ".join(cell.ljust(width)
                                  for cell, width in zip(line, widths)).rstrip())
    return "\n".join(rendered)
