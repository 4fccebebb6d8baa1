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
# # Checking strategic formulas
#
# Formulas name a coalition, how it randomises (`sh` or `ind`) and what it
# must achieve (`sure`, `almost` or `>t`). Thresholds decided only by value
# iteration may come back `unknown`; an SMT solver can close the gap.

# %%
from teamreach import bench_gen, iratl
from teamreach.smt_bridge import SolverEndpoint

door = bench_gen.door_game()

# %%
for text in [
    "<<1,2>>^sh_almost F goal",
    "<<1,2>>^ind_almost F goal",
    "<<1,2>>^ind_>3/10 F goal",
    "<<1,2>>^ind_>2/5 F goal",
    "<<1,2>>^ind_sure G !fail",
    "<<1>>^ind_>0 F goal",
]:
    res = iratl.satisfying_states(door, text)
    print(f"{text:30s} s0: {res.at('s0')}")

# %% [markdown]
# With a solver on the PATH, the open threshold is settled.

# %%
endpoint = SolverEndpoint.from_env()
if endpoint is not None:
    res = iratl.satisfying_states(door, "<<1,2>>^ind_>2/5 F goal", iratl.Backends(endpoint=endpoint))
    print(res.verdicts)
    for sub, how in res.provenance:
        print(" ", sub, "->", how)
else:
    print("no SMT solver found")

# %% [markdown]
# Operators outside the decidable fragment are rejected with a position.

# %%
for bad in ["<<1>>^ind_limit F goal", "<<1,2>>^ind_>1/2 G goal"]:
    try:
        iratl.parse_formula(bad)
    except iratl.FormulaSyntaxError as exc:
        print(f"{bad!r}: {exc}")
