"""Executing circuits on (simulated) QPUs, in process or over a socket.

Socket frames are newline-delimited JSON:

    request  {"type": "eval", "job_id": str, "circuit": {"qasm": str},
              "observable": "Z...Z", "shots": int, "seed": int}
    response {"type": "result", "job_id": str, "value": float}
           | {"type": "error", "job_id": str, "message": str}
"""

from __future__ import annotations

import json
import logging
import math
import socket
import socketserver
import threading
from dataclasses import dataclass

from .adversary import TamperModel, tamper
from .circuits import Circuit, emit_qasm, parse_qasm_subset
from .errors import CutBrokerError, InvalidArgument, JobError
from .simulator import NoiseModel, sampled_expectation

log = logging.getLogger(__name__)

# requests in flight per connection; keeps both socket buffers from filling
PIPELINE_DEPTH = 16


@dataclass(frozen=True)
class EvalRequest:
    job_id: str
    circuit: Circuit
    shots: int
    seed: int
    probe: bool = False  # broker-side only; never serialized

    def to_frame(self) -> dict:
        return {
            "type": "eval",
            "job_id": self.job_id,
            "circuit": {"qasm": emit_qasm(self.circuit)},
            "observable": self.circuit.observable.paulis,
            "shots": int(self.shots),
            "seed": int(self.seed),
        }

    @classmethod
    def from_frame(cls, frame: dict) -> EvalRequest:
        if frame.get("type") != "eval":
            raise InvalidArgument(f"unexpected frame type {frame.get('type')!r}")
        body = frame["circuit"]
        text = body["qasm"] if isinstance(body, dict) else body
        circuit = parse_qasm_subset(text)
        if "observable" in frame:
            circuit = circuit.with_observable(frame["observable"])
        return cls(str(frame["job_id"]), circuit, int(frame["shots"]), int(frame["seed"]))


class SimulatedQpu:
    """A QPU backed by the local simulator; optionally a saboteur."""

    def __init__(self, qpu_id: str, noise: NoiseModel | None = None, *,
                 malicious: bool = False, tamper_model: TamperModel | None = None,
                 tamper_probes: bool = True):
        self.qpu_id = qpu_id
        self.noise = noise
        self.malicious = malicious
        self.tamper_model = tamper_model or (TamperModel() if malicious else None)
        self.tamper_probes = tamper_probes
        self.executed = 0

    @property
    def tamper_calls(self) -> int:
        # audit counter: stays 0 for honest QPUs
        return self.tamper_model.calls if self.tamper_model is not None else 0

    def evaluate(self, request: EvalRequest) -> float:
        value = sampled_expectation(request.circuit, shots=request.shots,
                                    noise=self.noise, rng=request.seed)
        self.executed += 1
        if self.malicious and (self.tamper_probes or not request.probe):
            value = tamper(value, self.tamper_model)
        return value


class InProcessTransport:
    def __init__(self, qpus):
        self.qpus = {q.qpu_id: q for q in qpus}

    def run(self, qpu_id: str, requests) -> list[float]:
        try:
            qpu = self.qpus[qpu_id]
        except KeyError:
            raise JobError(qpu_id, "unknown QPU") from None
        try:
            return [qpu.evaluate(r) for r in requests]
        except CutBrokerError as exc:
            raise JobError(qpu_id, str(exc)) from exc

    def close(self):
        pass


# ---------------------------------------------------------------- socket worker


class _WorkerHandler(socketserver.StreamRequestHandler):
    def handle(self):
        qpu = self.server.qpu
        for raw in self.rfile:
            if not raw.strip():
                continue
            job_id = ""
            try:
                frame = json.loads(raw)
                job_id = str(frame.get("job_id", ""))
                value = qpu.evaluate(EvalRequest.from_frame(frame))
                reply = {"type": "result", "job_id": job_id, "value": value}
            except Exception as exc:  # report every failure to the broker
                reply = {"type": "error", "job_id": job_id, "message": str(exc)}
            self.wfile.write((json.dumps(reply) + "\n").encode())
            self.wfile.flush()


class WorkerServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, qpu: SimulatedQpu):
        super().__init__(address, _WorkerHandler)
        self.qpu = qpu


def serve_worker(qpu: SimulatedQpu, host="127.0.0.1", port=0, *, background=False):
    """Serve ``qpu`` over NDJSON. Returns the server; its address is ``server.server_address``."""
    server = WorkerServer((host, port), qpu)
    if background:
        threading.Thread(target=server.serve_forever, daemon=True).start()
    else:
        server.serve_forever()
    return server


class SocketTransport:
    """Client side of the NDJSON protocol; one connection per QPU."""

    def __init__(self, addresses: dict, timeout: float = 30.0):
        self.addresses = dict(addresses)
        self.timeout = timeout
        self._conns = {}

    def _conn(self, qpu_id):
        if qpu_id not in self._conns:
            try:
                addr = self.addresses[qpu_id]
            except KeyError:
                raise JobError(qpu_id, "no worker address configured") from None
            try:
                sock = socket.create_connection(tuple(addr), timeout=self.timeout)
            except OSError as exc:
                raise JobError(qpu_id, f"cannot connect to {addr}: {exc}") from exc
            self._conns[qpu_id] = (sock, sock.makefile("rwb"))
        return self._conns[qpu_id][1]

    def run(self, qpu_id: str, requests) -> list[float]:
        stream = self._conn(qpu_id)
        out = []
        requests = list(requests)
        try:
            for start in range(0, len(requests), PIPELINE_DEPTH):
                out.extend(self._exchange(qpu_id, stream, requests[start:start + PIPELINE_DEPTH]))
        except (OSError, ValueError, KeyError) as exc:
            raise JobError(qpu_id, f"transport failure: {exc}") from exc
        return out

    @staticmethod
    def _exchange(qpu_id, stream, requests):
        out = []
        for req in requests:
            stream.write((json.dumps(req.to_frame()) + "\n").encode())
        stream.flush()
        for req in requests:
            line = stream.readline()
            if not line:
                raise JobError(qpu_id, "worker closed the connection")
            reply = json.loads(line)
            if reply.get("job_id") != req.job_id:
                raise JobError(qpu_id, f"reply for {reply.get('job_id')!r}, expected {req.job_id!r}")
            if reply.get("type") == "error":
                raise JobError(qpu_id, reply.get("message", "worker error"))
            value = float(reply["value"])
            if not math.isfinite(value):
                raise JobError(qpu_id, "worker returned a non-finite value")
            out.append(value)
        return out

    def close(self):
        for sock, stream in self._conns.values():
            stream.close()
            sock.close()
        self._conns.clear()
