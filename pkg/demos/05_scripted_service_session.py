"""
Drive a complete session through the HTTP service, deterministically.

The service runs on a simulated clock (test-clock mode), so this script can
jump time to each stimulus onset, "press the button" at a chosen latency and
read the final result document, all without waiting out real inter-stimulus
intervals.  The same request protocol works against a live server.
"""

from fastapi.testclient import TestClient

from vstkit.service import create_app
from vstkit.staircase import LATE_PRESS_GRACE_S

TRUE_THRESHOLD = 0.42  # this scripted participant detects intensity >= 0.42

app = create_app(data_dir="demos/output/service-data", test_clock=True)
client = TestClient(app)

created = client.post("/v1/sessions", json={"rng_seed": 11})
session_id = created.json()["session_id"]
print(f"created session {session_id}")

deadline = 1.5
while True:
    state = client.get(f"/v1/sessions/{session_id}").json()
    if state["state"] != "running":
        break
    stimulus = state["pending_stimulus"]
    onset = stimulus["scheduled_onset"]
    if stimulus["intensity"] >= TRUE_THRESHOLD:
        client.post("/v1/test/clock", json={"set": onset + 0.4})
        outcome = client.post(f"/v1/sessions/{session_id}/response").json()["outcome"]
    else:
        client.post("/v1/test/clock", json={"set": onset + deadline + LATE_PRESS_GRACE_S})
        outcome = "missed (timeout)"
    print(
        f"trial {stimulus['trial_index']:2d}  intensity {stimulus['intensity']:.2f}  "
        f"-> {outcome}"
    )

result = client.get(f"/v1/sessions/{session_id}/result").json()["result"]
print(
    f"\nthreshold = {result['threshold_mean']:.3f} "
    f"(scripted participant threshold {TRUE_THRESHOLD}), "
    f"sd = {result['threshold_sd']:.4f}, "
    f"false positives = {result['false_positive_count']}"
)
print("event log + result document under demos/output/service-data/sessions/")
