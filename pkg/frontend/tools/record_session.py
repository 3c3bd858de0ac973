"""Record a live server session for the console's replay tests.

Runs the simulator with a console endpoint, drives it like an operator
(one bogus decision to capture an applied=false ack, then a real abort),
and writes every server frame in arrival order to
``frontend/test/fixtures/session.jsonl``.

Usage, from the repository root:

    python frontend/tools/record_session.py
"""

from __future__ import annotations

import json
import sys
import threading
from pathlib import Path

from websockets.sync.client import connect

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tests"))

from scenario_fixtures import jamming_scripted_abort  # noqa: E402

from emblemsim.runner import run  # noqa: E402
from emblemsim.scenario import load_scenario  # noqa: E402
from emblemsim.server import ConsoleServer  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "test" / "fixtures" / "session.jsonl"
PACE = 120.0


def recording_scenario():
    """Jammed X-band plus a revoked L-band emblem: the abort request carries
    misuse evidence (Revoked verdict) alongside the blocked carrier."""
    doc = jamming_scripted_abort()
    doc["hitl"] = {"mode": "console"}
    doc["duration_s"] = 40.0
    doc["jammers"][0]["band"] = "XBand"
    doc["emitters"].append(
        {"owner": "hospital-1", "band": "XBand", "emblem": "emblem-hosp-1",
         "period_s": 0.2}
    )
    doc["events"] = [{"at_s": 0.2, "action": "revoke_emblem", "emblem": "emblem-hosp-1"}]
    return load_scenario(doc)


def main() -> None:
    server = ConsoleServer("127.0.0.1", 0)
    scenario = recording_scenario()
    result_box = {}

    def sim():
        result_box["result"] = run(scenario, bridge=server.bridge, pace_factor=PACE)

    thread = threading.Thread(target=sim, daemon=True)
    thread.start()

    frames: list[dict] = []
    with connect(f"ws://127.0.0.1:{server.port}") as ws:
        decided = False
        while True:
            try:
                frame = json.loads(ws.recv(timeout=10))
            except TimeoutError:
                break
            frames.append(frame)
            if frame["type"] == "abort_request" and not decided:
                decided = True
                # a decision for an engagement that does not exist: the
                # applied=false ack exercises the console error path
                ws.send(json.dumps({
                    "type": "operator_decision",
                    "engagement_id": "weapon-9:nowhere-9",
                    "decision": "abort",
                    "operator_id": "op-recorder",
                }))
                ws.send(json.dumps({
                    "type": "operator_decision",
                    "engagement_id": frame["engagement_id"],
                    "decision": "abort",
                    "operator_id": "op-recorder",
                }))
            if frame["type"] == "state_update" and frame["phase"] == "Aborted":
                break

    thread.join(timeout=30)
    server.close()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("".join(json.dumps(f, sort_keys=True) + "\n" for f in frames))
    print(f"recorded {len(frames)} frames -> {OUT}")
    state = result_box["result"].states["weapon-1:hospital-1"]
    print("terminal phase:", state.phase.value)


if __name__ == "__main__":
    main()
