"""
Repeatability of the staircase estimate: ten sessions on one observer.

The headline question for a threshold test is not only whether it converges
but how tightly repeated measurements cluster.  Here ten simulated sessions
are run on the same observer (threshold 0.348) and the spread of the ten
estimates is compared against the intensity step size of 0.05: a usable
instrument should resolve thresholds more finely than its own step.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from vstkit import ObserverModel, StaircaseConfig, batch_precision

observer = ObserverModel(mu=0.348, sigma=0.02, guess_rate=0.02, lapse_rate=0.02)
config = StaircaseConfig()

stats = batch_precision(config, observer, n_sessions=10, rng_seed=2024)

for i, estimate in enumerate(stats.per_session_estimates):
    print(f"session {i}: threshold = {estimate:.3f}")
print(f"\nmean = {stats.mean:.3f}, sample SD = {stats.sample_sd:.3f}")
print(f"SD below the 0.05 intensity step: {stats.sample_sd < 0.05}")

# wider sweep: the same experiment over many seeds
sds = [
    batch_precision(config, observer, 10, rng_seed=b * 4096).sample_sd
    for b in range(20)
]
print(f"\nacross 20 independent 10-session batches: max SD = {max(sds):.3f}")

fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
left.plot(stats.per_session_estimates, "o-")
left.axhline(observer.mu, color="gray", linestyle=":", label="true threshold")
left.fill_between(
    range(10), stats.mean - stats.sample_sd, stats.mean + stats.sample_sd,
    alpha=0.2, label="+/- 1 SD",
)
left.set_xlabel("session")
left.set_ylabel("threshold estimate")
left.set_title("ten sessions, one observer")
left.legend(fontsize=8)
right.hist(sds, bins=10)
right.axvline(0.05, color="r", linestyle="--", label="intensity step")
right.set_xlabel("10-session sample SD")
right.set_ylabel("batches")
right.set_title("estimate spread across 20 batches")
right.legend(fontsize=8)
fig.tight_layout()
fig.savefig("demos/output/precision_experiment.png", dpi=120)
print("wrote demos/output/precision_experiment.png")
