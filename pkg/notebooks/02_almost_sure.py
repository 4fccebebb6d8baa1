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
# # Almost-sure reachability by SAT
#
# Winning with probability one depends only on which actions are played, not
# on their probabilities. The encoder asks a SAT solver for supports, a
# winning set and ranks; the decoded certificate is then re-checked exactly.

# %%
import numpy as np

from teamreach import almost_sure as asure
from teamreach import bench_gen, model_io

# %%
for name in ["door", "door-merged", "memory"]:
    res = asure.solve_almost_sure(bench_gen.builtin(name))
    print(f"{name:12s} winning={res.winning!s:5s} vars={res.variables:4d} clauses={res.clauses:4d}")

# %% [markdown]
# With shared randomness the merged player mixes the two matching joint
# choices, which covers both doors. The certificate:

# %%
merged = bench_gen.builtin("door-merged")
cert = asure.solve_almost_sure(merged).certificate
print(model_io.serialize_certificate(cert))
print(asure.verify_certificate(merged, cert))

# %% [markdown]
# Dropping one of the two joint choices breaks progress against one of the
# doors, and the checker says where.

# %%
(meta,) = merged.team
broken = asure.RankCertificate(cert.winning, cert.rank, {**cert.supports, (meta, "s0"): {"(L,L)"}})
print(asure.verify_certificate(merged, broken))

# %% [markdown]
# ## Clique games
#
# The team wins almost surely on a complete graph but not on a path.

# %%
for label, graph in [("K3", bench_gen.complete_graph(3)), ("P3", bench_gen.path_graph(3))]:
    g = bench_gen.gen_clique(*graph, 3)
    print(label, asure.solve_almost_sure(g).winning, asure.brute_force_almost_sure(g))

# %% [markdown]
# ## Binary against unary ranks
#
# Both rank encodings must agree; binary ranks need far fewer variables as
# the state count grows.

# %%
g = bench_gen.gen_pursuit(4, [(i, (i + 1) % 4) for i in range(4)] + [((i + 1) % 4, i) for i in range(4)],
                          (0, 2), 1)
for enc in (asure.BINARY, asure.UNARY):
    r = asure.solve_almost_sure(g, rank_encoding=enc)
    print(enc, r.winning, r.variables, r.clauses, f"{r.seconds:.3f}s")

# %% [markdown]
# ## Random games against the brute-force oracle

# %%
rng = np.random.default_rng(0)
agree = 0
for _ in range(100):
    h = bench_gen.gen_random(rng, n_states=3)
    agree += asure.solve_almost_sure(h).winning == asure.brute_force_almost_sure(h)
print(f"{agree}/100 agree")
