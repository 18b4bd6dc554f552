"""Newline-delimited JSON protocol for out-of-process proposal models.

One JSON object per line in each direction. Requests carry the live
specification with every value in surface syntax; responses carry scored
proposal texts. Unknown fields are ignored on both sides so either end can
grow extensions without breaking the other.
"""

import json
import select
import shlex
import socket
import subprocess
import sys
from dataclasses import dataclass

from . import dc_dsl
from .errors import ParseError, ProtocolError
from .search import Example, IOSpecification, Proposal

RF, DC = "rf", "dc"
ROLES = ("subgoal", "synthesizer", "combined")
WIRE_VERSION = 1


def _to_surface(domain, value):
    return value if domain == RF else dc_dsl.value_to_str(value)


def _from_surface(domain, text):
    if not isinstance(text, str):
        raise ProtocolError(f"expected surface string, got {text!r}")
    if domain == RF:
        return text
    try:
        return dc_dsl.value_from_str(text)
    except ParseError as exc:
        raise ProtocolError(f"bad value {text!r}: {exc}") from exc


@dataclass(frozen=True)
class Request:
    role: str
    domain: str
    k: int
    spec: IOSpecification


def encode_request(role, domain, k, spec):
    examples = []
    for ex in spec.examples:
        examples.append({
            "inputs": [_to_surface(domain, v) for v in ex.inputs],
            "remaining_output": _to_surface(domain, ex.remaining_output),
            "bindings": [[name, _to_surface(domain, v)]
                         for name, v in ex.bindings],
        })
    return json.dumps({"v": WIRE_VERSION, "role": role, "domain": domain,
                       "k": k, "spec": {"examples": examples}})


def decode_request(line):
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise ProtocolError(f"request is not JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("v") != WIRE_VERSION:
        raise ProtocolError(f"bad request envelope: {line!r}")
    role, domain, k = obj.get("role"), obj.get("domain"), obj.get("k")
    if role not in ROLES or domain not in (RF, DC):
        raise ProtocolError(f"bad role/domain: {role!r}/{domain!r}")
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise ProtocolError(f"bad proposal count: {k!r}")
    spec = obj.get("spec")
    raw = spec.get("examples") if isinstance(spec, dict) else None
    if not isinstance(raw, list) or not raw:
        raise ProtocolError("request carries no examples")
    examples = []
    for item in raw:
        if not isinstance(item, dict):
            raise ProtocolError(f"bad example: {item!r}")
        inputs = item.get("inputs")
        bindings = item.get("bindings", [])
        if not isinstance(inputs, list) or not isinstance(bindings, list):
            raise ProtocolError(f"bad example: {item!r}")
        pairs = []
        for pair in bindings:
            if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                    or not isinstance(pair[0], str)):
                raise ProtocolError(f"bad binding: {pair!r}")
            pairs.append((pair[0], _from_surface(domain, pair[1])))
        examples.append(Example(
            tuple(_from_surface(domain, v) for v in inputs),
            _from_surface(domain, item.get("remaining_output")),
            tuple(pairs)))
    return Request(role, domain, k, IOSpecification(domain, tuple(examples)))


def encode_response(proposals):
    return json.dumps({"v": WIRE_VERSION, "proposals": [
        {"text": p.text, "logp": p.logp} for p in proposals]})


def decode_response(line):
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise ProtocolError(f"response is not JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("v") != WIRE_VERSION:
        raise ProtocolError(f"bad response envelope: {line!r}")
    raw = obj.get("proposals")
    if not isinstance(raw, list):
        raise ProtocolError(f"bad proposals field: {raw!r}")
    proposals = []
    for item in raw:
        if not isinstance(item, dict):
            raise ProtocolError(f"bad proposal: {item!r}")
        text, logp = item.get("text"), item.get("logp")
        if not isinstance(text, str):
            raise ProtocolError(f"bad proposal text: {text!r}")
        if isinstance(logp, bool) or not isinstance(logp, (int, float)):
            raise ProtocolError(f"bad log-probability: {logp!r}")
        if logp > 0:
            raise ProtocolError(f"positive log-probability: {logp!r}")
        proposals.append(Proposal(text, float(logp)))
    return proposals


class SocketTransport:
    """Persistent NDJSON connection to a TCP endpoint."""

    def __init__(self, host, port, timeout=10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.settimeout(timeout)
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="")

    def roundtrip(self, line):
        self._file.write(line + "\n")
        self._file.flush()
        reply = self._file.readline()
        if not reply:
            raise ProtocolError("connection closed by server")
        return reply

    def close(self):
        # The makefile wrapper holds its own reference to the descriptor;
        # both must go or the peer never sees EOF.
        try:
            self._file.close()
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


class ProcessTransport:
    """NDJSON over a child process's standard streams."""

    def __init__(self, argv, timeout=10.0):
        self._timeout = timeout
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    def roundtrip(self, line):
        self._proc.stdin.write(line + "\n")
        self._proc.stdin.flush()
        ready, _, _ = select.select([self._proc.stdout], [], [], self._timeout)
        if not ready:
            raise TimeoutError(f"no reply within {self._timeout}s")
        reply = self._proc.stdout.readline()
        if not reply:
            raise ProtocolError("server process closed its output")
        return reply

    def close(self):
        self._proc.terminate()
        try:
            self._proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self._proc.kill()


def open_transport(endpoint, timeout=10.0):
    """`exec:CMD` spawns CMD as a child; `[tcp://]HOST:PORT` dials a socket."""
    if endpoint.startswith("exec:"):
        argv = shlex.split(endpoint[len("exec:"):])
        if not argv:
            raise ValueError(f"empty command in endpoint {endpoint!r}")
        return ProcessTransport(argv, timeout)
    target = endpoint[len("tcp://"):] if endpoint.startswith("tcp://") else endpoint
    host, _, port = target.rpartition(":")
    if not port.isdigit():
        raise ValueError(f"bad endpoint {endpoint!r}")
    return SocketTransport(host or "127.0.0.1", int(port), timeout)


def echo_proposals(request):
    """Deterministic loopback reply: the subgoal role gets the remaining
    outputs verbatim, other roles a fixed subprogram."""
    if request.role == "subgoal":
        text = "\n".join(_to_surface(request.domain, ex.remaining_output)
                         for ex in request.spec.examples)
    elif request.domain == RF:
        text = "Trim()"
    else:
        text = "Sort x0"
    return [Proposal(text, -1.0)]


def serve_stream(rfile, wfile, malformed_every=0):
    """Answer NDJSON requests from a stream pair until EOF.

    Undecodable requests get an empty proposal list so request/response
    pairing survives. With malformed_every=N, every Nth reply is deliberate
    garbage (client robustness drills). Returns the request count.
    """
    count = 0
    for line in rfile:
        if not line.strip():
            continue
        count += 1
        if malformed_every and count % malformed_every == 0:
            wfile.write('{"v": 1, "proposals": [{"text": 42, "logp"\n')
            wfile.flush()
            continue
        try:
            proposals = echo_proposals(decode_request(line))
        except ProtocolError:
            proposals = []
        wfile.write(encode_response(proposals) + "\n")
        wfile.flush()
    return count


def serve_tcp(host, port, malformed_every=0, max_connections=None,
              on_bound=None):
    """Echo server over TCP; handles connections one at a time."""
    server = socket.create_server((host, port))
    if on_bound is not None:
        on_bound(server.getsockname()[1])
    served = 0
    try:
        while max_connections is None or served < max_connections:
            conn, _ = server.accept()
            with conn:
                stream = conn.makefile("rw", encoding="utf-8", newline="")
                serve_stream(stream, stream, malformed_every)
            served += 1
    finally:
        server.close()
    return served


def serve_stdio(malformed_every=0):
    """Echo server over this process's own standard streams."""
    return serve_stream(sys.stdin, sys.stdout, malformed_every)
