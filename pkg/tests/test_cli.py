"""CLI: every subcommand end to end, exit codes, and the echo server as a
child process."""

import json
import subprocess
import sys

import pytest

from stepsynth import protocol, taskgen
from stepsynth.cli import main
from stepsynth.harness import RESULT_FIELDS, read_results


@pytest.fixture(scope="module")
def rf_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "rf.jsonl"
    rc = main(["gen-dataset", "--domain", "rf", "--split", "NONE",
               "--side", "train", "--count", "3", "--seed-start", "0",
               "--out", str(path), "--verify"])
    assert rc == 0
    return path


@pytest.fixture(scope="module")
def dc_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "dc.jsonl"
    rc = main(["gen-dataset", "--domain", "dc", "--split", "NONE",
               "--side", "train", "--count", "3", "--seed-start", "100",
               "--out", str(path)])
    assert rc == 0
    return path


class TestGenDataset:
    def test_writes_readable_tasks(self, rf_dataset, capsys):
        tasks = taskgen.read_tasks(rf_dataset)
        assert len(tasks) == 3
        assert all(t.domain == "rf" and t.split == "NONE" for t in tasks)

    def test_bad_split_rejected(self):
        with pytest.raises(SystemExit) as err:
            main(["gen-dataset", "--domain", "rf", "--split", "WEEKDAY",
                  "--side", "train", "--count", "1", "--out", "x.jsonl"])
        assert err.value.code == 2


class TestRunSearch:
    def test_oracle_exedec(self, rf_dataset, tmp_path, capsys):
        out = tmp_path / "res.jsonl"
        rc = main(["run-search", "--dataset", str(rf_dataset),
                   "--mode", "exedec", "--backend", "oracle",
                   "--out", str(out)])
        assert rc == 0
        assert "solved 3/3" in capsys.readouterr().out
        records = read_results(out)
        assert [tuple(r) for r in records] == [RESULT_FIELDS] * 3

    def test_oracle_nosubgoal(self, dc_dataset, tmp_path, capsys):
        out = tmp_path / "res.jsonl"
        rc = main(["run-search", "--dataset", str(dc_dataset),
                   "--mode", "nosubgoal", "--backend", "oracle",
                   "--out", str(out)])
        assert rc == 0
        assert "solved 3/3" in capsys.readouterr().out

    def test_enum_exedec(self, dc_dataset, tmp_path, capsys):
        out = tmp_path / "res.jsonl"
        rc = main(["run-search", "--dataset", str(dc_dataset),
                   "--mode", "exedec", "--backend", "enum",
                   "--beam-size", "4", "--out", str(out)])
        assert rc == 0
        assert "solved 3/3" in capsys.readouterr().out

    def test_stub_runs_without_claiming_false_solutions(self, dc_dataset,
                                                        tmp_path, capsys):
        out = tmp_path / "res.jsonl"
        rc = main(["run-search", "--dataset", str(dc_dataset),
                   "--mode", "nosubgoal", "--backend", "stub",
                   "--seed", "5", "--beam-size", "4", "--max-steps", "3",
                   "--out", str(out)])
        assert rc == 0
        records = read_results(out)
        assert len(records) == 3
        for record in records:
            if record["solved"]:
                assert isinstance(record["program"], str)

    def test_remote_requires_endpoint(self, dc_dataset, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["run-search", "--dataset", str(dc_dataset),
                  "--mode", "exedec", "--backend", "remote",
                  "--out", str(tmp_path / "res.jsonl")])
        assert err.value.code == 2


class TestEval:
    @pytest.fixture()
    def solved_pair(self, rf_dataset, tmp_path):
        out = tmp_path / "res.jsonl"
        main(["run-search", "--dataset", str(rf_dataset),
              "--mode", "exedec", "--backend", "oracle", "--out", str(out)])
        return rf_dataset, out

    def test_json_format(self, solved_pair, capsys):
        dataset, results = solved_pair
        rc = main(["eval", "--dataset", str(dataset),
                   "--results", str(results),
                   "--mode", "exedec", "--backend", "oracle",
                   "--beam-size", "1"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["mode"] == "exedec"
        assert out["rows"][0]["success_rate"] == 1.0

    def test_table_to_file(self, solved_pair, tmp_path, capsys):
        dataset, results = solved_pair
        out_path = tmp_path / "report.txt"
        rc = main(["eval", "--dataset", str(dataset),
                   "--results", str(results),
                   "--format", "table", "--out", str(out_path)])
        assert rc == 0
        text = out_path.read_text()
        assert text.splitlines()[0].startswith("domain")
        assert "100.0" in text
        assert capsys.readouterr().out == ""

    def test_unpaired_flags_rejected(self, solved_pair):
        dataset, results = solved_pair
        with pytest.raises(SystemExit) as err:
            main(["eval", "--dataset", str(dataset),
                  "--dataset", str(dataset), "--results", str(results)])
        assert err.value.code == 2

    def test_mismatch_exits_one(self, solved_pair, tmp_path, capsys):
        dataset, results = solved_pair
        stray = tmp_path / "stray.jsonl"
        record = dict(zip(RESULT_FIELDS, [777, False, None, None, None, 1.0]))
        stray.write_text(json.dumps(record) + "\n")
        rc = main(["eval", "--dataset", str(dataset),
                   "--results", str(stray)])
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestExec:
    def test_rf(self, capsys):
        rc = main(["exec", "--domain", "rf", "--input", "hello world",
                   "GetToken(WORD, 2) | Const('!')"])
        assert rc == 0
        assert capsys.readouterr().out == "world!\n"

    def test_dc_multiple_examples(self, capsys):
        rc = main(["exec", "--domain", "dc",
                   "--input", "[ 3 1 2 ] ; 2", "--input", "[ 9 8 ] ; 1",
                   "x0 = INPUT | x1 = INPUT | x2 = Sort x0 | "
                   "x3 = Take x1 x2"])
        assert rc == 0
        assert capsys.readouterr().out == "[ 1 2 ]\n[ 8 ]\n"

    def test_exec_error_exits_one(self, capsys):
        rc = main(["exec", "--domain", "rf", "--input", "",
                   "GetToken(WORD, 2)"])
        assert rc == 1
        assert "error" in capsys.readouterr().out

    def test_bad_input_value_exits_one(self, capsys):
        rc = main(["exec", "--domain", "dc", "--input", "[ 3 1",
                   "x0 = INPUT | x1 = Sort x0"])
        assert rc == 1

    def test_parse_error_exits_two(self, capsys):
        rc = main(["exec", "--domain", "rf", "--input", "abc",
                   "GetToken(WORD"])
        assert rc == 2
        assert "parse error" in capsys.readouterr().err

    def test_keeps_going_after_a_failing_example(self, capsys):
        rc = main(["exec", "--domain", "rf",
                   "--input", "", "--input", "a b",
                   "GetToken(WORD, 2)"])
        assert rc == 1
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("error")
        assert lines[1] == "b"


REQUEST = json.dumps({
    "v": 1, "role": "combined", "domain": "rf", "k": 1,
    "spec": {"examples": [{"inputs": [" hi "], "remaining_output": "hi",
                           "bindings": []}]}})


class TestProtocolEcho:
    def test_stdio_round_trip(self):
        proc = subprocess.run(
            [sys.executable, "-m", "stepsynth.cli", "protocol-echo",
             "--stdio"],
            input=REQUEST + "\n", capture_output=True, text=True, timeout=30)
        assert proc.returncode == 0
        response = protocol.decode_response(proc.stdout)
        assert response[0].text == "Trim()"

    def test_tcp_round_trip(self):
        proc = subprocess.Popen(
            [sys.executable, "-m", "stepsynth.cli", "protocol-echo",
             "--port", "0", "--max-connections", "1"],
            stdout=subprocess.PIPE, text=True)
        try:
            port = int(proc.stdout.readline())
            transport = protocol.open_transport(f"127.0.0.1:{port}")
            reply = transport.roundtrip(REQUEST)
            transport.close()
            assert protocol.decode_response(reply)[0].text == "Trim()"
            assert proc.wait(timeout=30) == 0
        finally:
            proc.kill()

    def test_mutually_exclusive_modes(self):
        with pytest.raises(SystemExit) as err:
            main(["protocol-echo", "--stdio", "--port", "0"])
        assert err.value.code == 2
