"""
Repairs over a random corpus
============================

Small random trees (a handful of options, a few source files, nested
conditionals) are repaired and checked against a brute-force ground truth
that simulates the build directly.  The tables at the end show how many
configurations patches need and how much each analysis shortcut saves.
"""

from collections import Counter

import numpy as np

from confrepair.configfile import ConfigFile
from confrepair.fixtures import generate_random_fixture
from confrepair.patch import patch_lines_from_text
from confrepair.repair import Optimizations, krepair, load_bundle

SEEDS = range(200)


def run(fx, opts):
    bundle = load_bundle(fx.tree(), fx.kconfig_root)
    pairs = patch_lines_from_text(fx.patch)
    return krepair(pairs, ConfigFile.parse(fx.config), bundle, optimizations=opts), bundle


# %%
# Groups and agreement with the ground truth
# ------------------------------------------

groups = Counter()
agree = 0
change = []
for seed in SEEDS:
    fx = generate_random_fixture(seed)
    outcome, bundle = run(fx, Optimizations())
    groups[len(outcome.configs)] += 1
    oracle_groups, oracle_dead = fx.oracle_partition()
    got = [[tuple(p) for p in rc.covered] for rc in outcome.configs]
    agree += got == oracle_groups and [tuple(p) for p, _ in outcome.uncoverable] == oracle_dead
    change.extend(len(rc.options_changed) / len(bundle.spec.options) for rc in outcome.configs)

print("configurations per patch:", dict(sorted(groups.items())))
print(f"partition equals ground truth on {agree}/{len(SEEDS)} fixtures")
print(f"share of options changed: mean {np.mean(change):.3f}, 95th percentile {np.percentile(change, 95):.3f}")

# %%
# Cost of turning the shortcuts off
# ---------------------------------

variants = {
    "all on": Optimizations(),
    "no unconditional skip": Optimizations(False, True, True),
    "no chain reuse": Optimizations(True, False, True),
    "no nested sat": Optimizations(True, True, False),
    "all off": Optimizations.none(),
}
totals = {name: np.zeros(2, dtype=int) for name in variants}
for seed in SEEDS:
    fx = generate_random_fixture(seed)
    for name, opts in variants.items():
        outcome, _ = run(fx, opts)
        totals[name] += (outcome.stats["solver_calls"], outcome.stats["line_pc_queries"])
print(f"{'variant':<24}{'solver calls':>14}{'line queries':>14}")
for name, (calls, queries) in totals.items():
    print(f"{name:<24}{calls:>14}{queries:>14}")
