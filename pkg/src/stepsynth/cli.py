"""Command-line interface.

Subcommands: gen-dataset (write task files), run-search (solve a task file,
write results), eval (score results, print a report), exec (run one program
on given inputs), protocol-echo (loopback server for remote backends).
"""

import argparse
import json
import sys

from . import backends, dc_dsl, harness, protocol, rf_dsl, taskgen
from .errors import ExecError, MismatchError, ParseError
from .search import SearchConfig
from .splits import SPLIT_IDS, TEST, TRAIN

RF, DC = "rf", "dc"


def cmd_gen_dataset(args):
    tasks = taskgen.build_dataset(args.domain, args.split, args.side,
                                  args.count, args.seed_start)
    taskgen.write_tasks(args.out, tasks)
    if args.verify:
        for task in taskgen.read_tasks(args.out):
            taskgen.verify_task(task)
    print(f"wrote {len(tasks)} tasks to {args.out}")
    return 0


def _backend_factory(args, parser):
    mode, kind = args.mode, args.backend
    if kind == "oracle":
        def factory(task):
            trace = taskgen.decompose(task)
            if mode == "exedec":
                return (backends.OracleBackend(trace, "subgoal"),
                        backends.OracleBackend(trace, "synthesizer"))
            return backends.OracleBackend(trace, "combined")
        return factory
    if kind == "enum":
        # The enumerator cannot invent subgoals; two-stage runs pair it
        # with oracle subgoals (its intended benchmark configuration).
        enum_role = "synthesizer" if mode == "exedec" else "combined"
        enum = backends.EnumBackend(role=enum_role)

        def factory(task):
            if mode == "exedec":
                trace = taskgen.decompose(task)
                return backends.OracleBackend(trace, "subgoal"), enum
            return enum
        return factory
    if kind == "stub":
        def factory(task):
            if mode == "exedec":
                return (backends.StubBackend("subgoal", args.seed),
                        backends.StubBackend("synthesizer", args.seed))
            return backends.StubBackend("combined", args.seed)
        return factory
    if not args.endpoint:
        parser.error("--backend remote requires --endpoint")
    if mode == "exedec":
        pair = (backends.RemoteBackend("subgoal", args.endpoint, args.timeout),
                backends.RemoteBackend("synthesizer", args.endpoint,
                                       args.timeout))
        return lambda task: pair
    combined = backends.RemoteBackend("combined", args.endpoint, args.timeout)
    return lambda task: combined


def cmd_run_search(args):
    tasks = taskgen.read_tasks(args.dataset)
    config = SearchConfig(beam_size=args.beam_size, max_steps=args.max_steps)
    factory = _backend_factory(args, args.parser)
    records = harness.run_searches(tasks, args.mode, factory, config)
    harness.write_results(args.out, records)
    solved = sum(1 for r in records if r["solved"])
    print(f"solved {solved}/{len(records)} tasks; results in {args.out}")
    return 0


def cmd_eval(args):
    if len(args.dataset) != len(args.results):
        args.parser.error("--dataset and --results must be paired")
    try:
        reports = [harness.evaluate(results, dataset)
                   for results, dataset in zip(args.results, args.dataset)]
        report = harness.merge_reports(
            reports, mode=args.mode, backend=args.backend,
            beam_size=args.beam_size)
    except MismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.format == "json":
        text = json.dumps(harness.report_json(report), indent=2)
    else:
        text = harness.report_table(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_exec(args):
    try:
        if args.domain == RF:
            program = rf_dsl.parse(args.program)
        else:
            program = dc_dsl.parse(args.program)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    failures = 0
    for raw in args.input:
        try:
            if args.domain == RF:
                print(rf_dsl.execute(program, raw))
            else:
                values = [dc_dsl.value_from_str(part.strip())
                          for part in raw.split(";")]
                print(dc_dsl.value_to_str(dc_dsl.execute(program, values)))
        except (ExecError, ParseError) as exc:
            print(f"error: {exc}")
            failures += 1
    return 1 if failures else 0


def cmd_protocol_echo(args):
    if args.stdio:
        protocol.serve_stdio(args.malformed_every)
        return 0
    protocol.serve_tcp(args.host, args.port, args.malformed_every,
                       max_connections=args.max_connections,
                       on_bound=lambda port: print(port, flush=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stepsynth",
        description="Program synthesis by execution decomposition.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-dataset", help="generate a task file")
    gen.add_argument("--domain", required=True, choices=(RF, DC))
    gen.add_argument("--split", required=True, choices=SPLIT_IDS)
    gen.add_argument("--side", required=True, choices=(TRAIN, TEST))
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed-start", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--verify", action="store_true",
                     help="re-check every task invariant after writing")
    gen.set_defaults(fn=cmd_gen_dataset)

    run = sub.add_parser("run-search", help="solve a task file")
    run.add_argument("--dataset", required=True)
    run.add_argument("--mode", required=True, choices=("exedec", "nosubgoal"))
    run.add_argument("--backend", required=True,
                     choices=("oracle", "enum", "remote", "stub"))
    run.add_argument("--beam-size", type=int, default=1)
    run.add_argument("--max-steps", type=int, default=None)
    run.add_argument("--endpoint", default=None,
                     help="remote backend address: HOST:PORT or exec:CMD")
    run.add_argument("--timeout", type=float, default=10.0)
    run.add_argument("--seed", type=int, default=0,
                     help="seed for the stub backend")
    run.add_argument("--out", required=True)
    run.set_defaults(fn=cmd_run_search)

    ev = sub.add_parser("eval", help="score result files")
    ev.add_argument("--dataset", action="append", required=True)
    ev.add_argument("--results", action="append", required=True)
    ev.add_argument("--format", choices=("json", "table"), default="json")
    ev.add_argument("--out", default=None)
    ev.add_argument("--mode", default=None)
    ev.add_argument("--backend", default=None)
    ev.add_argument("--beam-size", type=int, default=None)
    ev.set_defaults(fn=cmd_eval)

    ex = sub.add_parser("exec", help="run one program on given inputs")
    ex.add_argument("--domain", required=True, choices=(RF, DC))
    ex.add_argument("--input", action="append", required=True,
                    help="one example's inputs; list-domain variables "
                         "are ';'-separated surface values")
    ex.add_argument("program")
    ex.set_defaults(fn=cmd_exec)

    echo = sub.add_parser("protocol-echo",
                          help="loopback server for remote backends")
    group = echo.add_mutually_exclusive_group(required=True)
    group.add_argument("--stdio", action="store_true",
                       help="serve on stdin/stdout")
    group.add_argument("--port", type=int, default=None,
                       help="serve on TCP; 0 picks a free port "
                            "(printed on stdout)")
    echo.add_argument("--host", default="127.0.0.1")
    echo.add_argument("--malformed-every", type=int, default=0,
                      help="send garbage instead of every Nth reply")
    echo.add_argument("--max-connections", type=int, default=None)
    echo.set_defaults(fn=cmd_protocol_echo)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.parser = parser
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
