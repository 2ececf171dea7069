"""
Run one simulated vibration-threshold session and plot the staircase.

A simulated observer with a known detection threshold presses the response
button whenever it "feels" the stimulus.  The staircase lowers the intensity
after each detection and raises it after each miss; after 8 direction
reversals the threshold estimate is the mean intensity at the reversals.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from vstkit import ObserverModel, StaircaseConfig, run_simulated_session

observer = ObserverModel(mu=0.348, sigma=0.02, guess_rate=0.02, lapse_rate=0.02)
config = StaircaseConfig()

result = run_simulated_session(config, observer, rng_seed=7)

print(f"trials run      : {len(result.trials)}")
print(f"reversals       : {len(result.reversal_indices)}")
print(f"threshold mean  : {result.threshold_mean:.3f}  (true mu = {observer.mu})")
print(f"threshold sd    : {result.threshold_sd:.3f}")
print(f"false positives : {result.false_positive_count}")
print(f"termination     : {result.termination.value}")

fig, ax = plt.subplots(figsize=(8, 4))
intensities = [t.intensity for t in result.trials]
ax.step(range(len(intensities)), intensities, where="mid", label="presented intensity")
detected = [t.trial_index for t in result.trials if t.outcome.value == "detected"]
missed = [t.trial_index for t in result.trials if t.outcome.value != "detected"]
ax.plot(detected, [intensities[i] for i in detected], "go", label="detected")
ax.plot(missed, [intensities[i] for i in missed], "rx", label="missed")
ax.plot(
    result.reversal_indices,
    [intensities[i] for i in result.reversal_indices],
    "ks", fillstyle="none", markersize=10, label="reversal",
)
ax.axhline(observer.mu, color="gray", linestyle=":", label="true threshold")
ax.axhline(result.threshold_mean, color="C0", linestyle="--", label="estimate")
ax.set_xlabel("trial")
ax.set_ylabel("intensity")
ax.legend(loc="upper right", fontsize=8)
ax.set_title("1-up/1-down staircase with a simulated observer")
fig.tight_layout()
fig.savefig("demos/output/single_session.png", dpi=120)
print("wrote demos/output/single_session.png")
