"""Live operator console service.

Exposes the wire protocol over WebSocket, one JSON message per text frame:

    server->client  {"type": "abort_request", "engagement_id", "sim_time",
                     "evidence": {...}, "timeout_s"}
    client->server  {"type": "operator_decision", "engagement_id",
                     "decision": "abort"|"proceed", "operator_id"}
    server->client  {"type": "ack", "engagement_id", "applied", "reason"}
    server->client  {"type": "state_update", "engagement_id", "phase",
                     "sim_time"}

The simulation thread owns the world; this module only moves messages
across two queues.  New connections receive a snapshot (pending abort
requests plus the latest phase per engagement) so reconnecting consoles
re-sync.  A malformed client frame gets an error frame and the connection
is closed; the simulation is unaffected.
"""

from __future__ import annotations

import json
import queue
import threading

from websockets.sync.server import serve as ws_serve

from .engagement import OperatorDecision
from .runner import OperatorBridge, RunResult, run
from .scenario import Scenario


class BindFailure(Exception):
    pass


class ProtocolViolation(Exception):
    pass


def _parse_decision(raw: str | bytes) -> OperatorDecision:
    try:
        msg = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolViolation(f"not valid JSON: {exc}") from exc
    if not isinstance(msg, dict) or msg.get("type") != "operator_decision":
        raise ProtocolViolation("expected an operator_decision message")
    eid = msg.get("engagement_id")
    decision = msg.get("decision")
    operator = msg.get("operator_id")
    if not isinstance(eid, str) or not eid:
        raise ProtocolViolation("engagement_id must be a non-empty string")
    if decision not in ("abort", "proceed"):
        raise ProtocolViolation("decision must be 'abort' or 'proceed'")
    if not isinstance(operator, str) or not operator:
        raise ProtocolViolation("operator_id must be a non-empty string")
    return OperatorDecision(eid, decision, operator)


class ConsoleBridge(OperatorBridge):
    """Thread-safe queue pair between the sim loop and websocket sessions."""

    paced = True

    def __init__(self) -> None:
        self._inbound: queue.Queue[OperatorDecision] = queue.Queue()
        self._lock = threading.Lock()
        self._clients: set = set()
        self._pending: dict[str, dict] = {}  # open abort requests by engagement
        self._latest_phase: dict[str, dict] = {}

    # -- simulation side ----------------------------------------------------

    def emit(self, message: dict) -> None:
        mtype = message.get("type")
        with self._lock:
            if mtype == "abort_request":
                self._pending[message["engagement_id"]] = message
            elif mtype == "state_update":
                eid = message["engagement_id"]
                self._latest_phase[eid] = message
                if message.get("phase") != "AwaitingOperator":
                    self._pending.pop(eid, None)
            elif mtype == "ack" and message.get("applied"):
                self._pending.pop(message["engagement_id"], None)
            clients = list(self._clients)
        payload = json.dumps(message, sort_keys=True)
        for client in clients:
            try:
                client.send(payload)
            except Exception:
                self._drop(client)

    def poll_decisions(self, now: float) -> list[OperatorDecision]:
        decisions = []
        while True:
            try:
                decisions.append(self._inbound.get_nowait())
            except queue.Empty:
                return decisions

    # -- websocket side -----------------------------------------------------

    def attach(self, connection) -> None:
        with self._lock:
            self._clients.add(connection)
            snapshot = sorted(self._latest_phase.values(), key=lambda m: m["engagement_id"])
            pending = sorted(self._pending.values(), key=lambda m: m["engagement_id"])
        for message in snapshot + pending:
            connection.send(json.dumps(message, sort_keys=True))

    def _drop(self, connection) -> None:
        with self._lock:
            self._clients.discard(connection)

    def handle(self, connection) -> None:
        self.attach(connection)
        try:
            for raw in connection:
                try:
                    decision = _parse_decision(raw)
                except ProtocolViolation as exc:
                    connection.send(json.dumps({"type": "error", "reason": str(exc)}))
                    connection.close(code=1002, reason="protocol violation")
                    return
                self._inbound.put(decision)
        finally:
            self._drop(connection)


class ConsoleServer:
    """Owns the websocket listener thread and its bridge."""

    def __init__(self, host: str, port: int):
        self.bridge = ConsoleBridge()
        try:
            self._server = ws_serve(self.bridge.handle, host, port)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="emblemsim-console", daemon=True
        )
        self._thread.start()

    @property
    def port(self) -> int:
        return self._server.socket.getsockname()[1]

    def close(self) -> None:
        self._server.shutdown()
        self._thread.join(timeout=5)


def parse_address(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must be host:port, got {address!r}")
    return host, int(port)


def serve(
    scenario: Scenario,
    address: str,
    seed_override: int | None = None,
    pace_factor: float = 1.0,
) -> RunResult:
    """Run a console-mode scenario with a live operator endpoint.

    ``pace_factor`` is sim seconds per wall second (1.0 = real time); it
    only paces the loop, all decisions still apply at tick boundaries.
    """
    if scenario.hitl.mode != "console":
        raise ValueError("serve() requires hitl mode 'console'")
    host, port = parse_address(address)
    server = ConsoleServer(host, port)
    try:
        return run(
            scenario,
            seed_override=seed_override,
            bridge=server.bridge,
            pace_factor=pace_factor,
        )
    finally:
        server.close()
