"""Shared helpers for the test suite."""

from __future__ import annotations

import math
import random
from typing import Optional

from vstkit.staircase import LATE_PRESS_GRACE_S, StaircaseConfig
from vstkit.store import config_to_doc


def normal_cdf_series(z: float, terms: int = 80) -> float:
    """Independent oracle for the standard normal CDF via its Taylor series.

    Phi(z) = 1/2 + (1/sqrt(2*pi)) * sum_n (-1)^n z^(2n+1) / (n! 2^n (2n+1)).
    Accurate to ~1e-14 for |z| <= 6 with 80 terms.
    """
    if z < -8.0:
        return 0.0
    if z > 8.0:
        return 1.0
    total = 0.0
    for n in range(terms):
        denom = math.factorial(n) * (2.0**n) * (2 * n + 1)
        total += ((-1) ** n) * (z ** (2 * n + 1)) / denom
    return 0.5 + total / math.sqrt(2.0 * math.pi)


def random_script(
    rng: random.Random,
    n: int = 150,
    config: Optional[StaircaseConfig] = None,
    late_grace: float = LATE_PRESS_GRACE_S,
) -> list[Optional[float]]:
    """Random per-trial latency script mixing detections, misses, late presses
    and spontaneous presses, representable both by the in-process driver and
    the HTTP service."""
    config = config or StaircaseConfig()
    deadline = config.response_deadline
    script: list[Optional[float]] = []
    for _ in range(n):
        roll = rng.random()
        if roll < 0.55:  # detected
            script.append(rng.uniform(0.05, deadline - 0.05))
        elif roll < 0.80:  # miss
            script.append(None)
        elif roll < 0.90:  # late press, still attributed
            script.append(rng.uniform(deadline + 0.05, deadline + late_grace - 0.05))
        else:  # spontaneous press during the following ISI
            script.append(
                rng.uniform(deadline + late_grace + 0.05,
                            deadline + late_grace + 0.35)
            )
    return script


def drive_service_session(
    client,
    config: StaircaseConfig,
    script: list[Optional[float]],
    onsets: list[float],
    late_grace: float = LATE_PRESS_GRACE_S,
) -> tuple[str, dict]:
    """Drive a scripted session through a test-clock service.

    ``onsets`` are the scheduled onset times the engine will produce for
    this config/seed (available from a direct run of the same script); the
    driver sets the simulated clock to exact press instants so the service
    session is bit-identical to the in-process one.  Returns (session_id,
    result document).
    """
    deadline = config.response_deadline

    def set_clock(t: float) -> None:
        response = client.post("/v1/test/clock", json={"set": t})
        assert response.status_code == 200, response.text

    created = client.post("/v1/sessions", json=config_to_doc(config))
    assert created.status_code == 201, created.text
    session_id = created.json()["session_id"]
    for k, onset in enumerate(onsets):
        latency = script[k] if k < len(script) else None
        if latency is None:
            set_clock(onset + deadline + late_grace)
        elif latency <= deadline + late_grace:
            set_clock(onset + latency)
            pressed = client.post(f"/v1/sessions/{session_id}/response")
            assert pressed.status_code == 200, pressed.text
        else:  # trial times out, the press lands in the following ISI
            set_clock(onset + deadline + late_grace)
            if k == len(onsets) - 1:
                break  # session over; a press now would be rejected, not counted
            set_clock(onset + latency)
            pressed = client.post(f"/v1/sessions/{session_id}/response")
            assert pressed.status_code == 200, pressed.text
            assert pressed.json()["outcome"] == "false_positive"
    result = client.get(f"/v1/sessions/{session_id}/result")
    assert result.status_code == 200, result.text
    return session_id, result.json()
