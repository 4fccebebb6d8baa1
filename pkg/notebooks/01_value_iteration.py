# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Value iteration with independent randomisation
#
# Two players share a goal but draw their random choices privately. We compare
# that value with the shared-randomness value on the bundled example games.

# %%
import time

import numpy as np

from teamreach import bench_gen, vi
from teamreach.game import MemorylessProfile

# %% [markdown]
# ## The door game
#
# Both players must pick the door the environment leaves open. Mismatched
# picks lose; a matched pick on the closed door retries.

# %%
door = bench_gen.door_game()
ind = vi.value_iteration(door, mode=vi.INDEPENDENT, record_trace=True)
sh = vi.value_iteration(door, mode=vi.SHARED)
print(f"independent: {ind.value():.6f} after {ind.iterations} iterations")
print(f"shared:      {sh.value():.6f} after {sh.iterations} iterations")

# %% [markdown]
# The iterates are lower bounds. Certification fixes the extracted profile
# and lets the opponent best-respond exactly.

# %%
cert = vi.certify(ind.game, ind.profile)
print({s: round(v, 6) for s, v in cert.items()})
print(ind.profile.get("1", "s0"), ind.profile.get("2", "s0"))

# %%
trace = np.array(ind.trace)
print(trace[:, door.state_index["s0"]].round(4))

# %% [markdown]
# Uniform play already guarantees the same value here: each round reaches the
# goal with probability 1/4 and fails with probability 1/2.

# %%
print(vi.certify(door, MemorylessProfile.uniform(door))["s0"])

# %% [markdown]
# ## Benchmarks
#
# A small table over the generator families. Runtimes are wall-clock seconds
# on this machine.

# %%
benches = {
    "memory": bench_gen.memory_game(),
    "jamming C=2 B=[1,1]": bench_gen.gen_jamming(2, [1, 1]),
    "pursuit 1": bench_gen.pursuit_scenario(1),
    "robot 1": bench_gen.robot_scenario(1),
}
print(f"{'game':22s} {'states':>6s} {'trans':>6s} {'shared':>8s} {'ind':>8s} {'secs':>6s}")
for name, g in benches.items():
    t0 = time.perf_counter()
    s = vi.value_iteration(g, mode=vi.SHARED).value()
    r = vi.value_iteration(g, mode=vi.INDEPENDENT)
    c = vi.certify(r.game, r.profile)[g.initial]
    print(f"{name:22s} {len(g.states):6d} {g.transition_count():6d} {s:8.4f} {c:8.4f} "
          f"{time.perf_counter() - t0:6.2f}")
