"""
CNF encoding, assumptions and unsat cores
=========================================

The repair loop leans on two solver features: solving under assumptions
(one literal per setting of the input configuration) and reporting which
assumptions were to blame when the answer is no.  This script checks both
against plain enumeration on random instances.
"""

import random

import numpy as np

from confrepair.logic import CnfFormula, Literal, SolverStats, Var, conj, disj, neg, solve, to_cnf, truth_table

rng = random.Random(1)


def random_formula(names, depth):
    if depth == 0 or rng.random() < 0.25:
        return Var(rng.choice(names))
    kids = [random_formula(names, depth - 1) for _ in range(rng.randint(2, 3))]
    roll = rng.random()
    if roll < 0.2:
        return neg(kids[0])
    return conj(*kids) if roll < 0.6 else disj(*kids)


# %%
# Tseitin encoding versus truth tables
# ------------------------------------
# The encoding adds unnamed auxiliary variables but keeps satisfiability.

names = [f"x{i}" for i in range(8)]
agree, sizes = 0, []
for _ in range(500):
    f = random_formula(names, 4)
    cnf = to_cnf(f)
    sizes.append(len(cnf.clauses))
    agree += solve(cnf).sat == bool(truth_table(f, names).any())
print(f"agreement on {agree}/500 formulas; clauses per formula: median {np.median(sizes):.0f}, max {max(sizes)}")

# %%
# Cores under assumptions
# -----------------------
# A chain ``a -> b -> c`` with ``a`` assumed true and ``c`` assumed false is
# contradictory; the unrelated assumption on ``d`` stays out of the core.

cnf = to_cnf(conj(disj(neg(Var("a")), Var("b")), disj(neg(Var("b")), Var("c"))))
assumptions = [Literal("a"), Literal("d"), Literal("c", False)]
out = solve(cnf, assumptions)
print("sat:", out.sat, "core:", [str(l) for l in out.core])

# %%
# Dropping cores until the rest fits
# ----------------------------------
# This is the shape of the repair loop: each round removes at least one
# assumption, so it ends within as many rounds as there are assumptions.

stats = SolverStats()
cnf = CnfFormula()
for v in range(1, 13):
    cnf.var(f"v{v}")
for _ in range(30):
    cnf.add_clause([rng.choice([-1, 1]) * rng.randint(1, 12) for _ in range(3)])
remaining = [Literal(f"v{v}", rng.random() < 0.5) for v in range(1, 13)]
rounds = 0
while True:
    out = solve(cnf, remaining, stats=stats)
    if out.sat:
        break
    rounds += 1
    remaining = [a for a in remaining if a not in set(out.core)]
print(f"kept {len(remaining)} of 12 assumptions after {rounds} rounds; solver stats {stats.as_dict()}")
