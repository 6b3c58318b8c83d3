"""
Repairing a configuration for an interrupt-controller patch
===========================================================

A small tree with one driver, ``drivers/irqchip/irq-gic.c``, which is only
built when ``ARM_GIC`` is on.  ``ARM_GIC`` has no prompt and is pulled in
through ``ARM_GIC_PM``, which in turn depends on ``PM``.  The patch touches
both arms of an ``#ifdef CONFIG_GIC_NON_BANKED`` block, so no single
configuration can build every changed line.
"""

import numpy as np

from confrepair.configfile import ConfigFile
from confrepair.coverage import aggregate_coverage, measure_coverage
from confrepair.fixtures import figure2_fixture
from confrepair.logic import to_infix, truth_table
from confrepair.patch import patch_lines_from_text
from confrepair.repair import get_constraint, krepair, load_bundle

fx = figure2_fixture()
bundle = load_bundle(fx.tree(), fx.kconfig_root)
pairs = patch_lines_from_text(fx.patch)
print(f"{len(pairs)} changed lines, input config: {fx.config.strip()}")

# %%
# The spec as a formula, and what it allows
# -----------------------------------------
# Enumerating every assignment shows how few of them are valid.

names = bundle.spec.variables()
valid = truth_table(bundle.spec_formula, names)
print(to_infix(bundle.spec_formula))
print(f"{valid.sum()} of {valid.size} assignments satisfy the spec")

# %%
# Per-line constraints
# --------------------
# Lines outside any conditional only need the file to be built.  Lines
# inside the two arms add ``GIC_NON_BANKED`` or its negation.

for pair in pairs:
    print(f"{pair.line:>3}  {to_infix(get_constraint(bundle, pair.path, pair.line))}")

# %%
# Repair
# ------
# The greedy grouping puts the first arm with the unconditional lines and
# leaves the second arm for a second configuration.

original = ConfigFile.parse(fx.config)
outcome = krepair(pairs, original, bundle)
for k, rc in enumerate(outcome.configs, 1):
    print(f"config {k}: {len(rc.covered)} lines, changed {rc.options_changed}")
    print(rc.config.deparse(bundle.spec))

# %%
# Coverage
# --------
# Each repaired configuration alone misses one arm; together they cover
# the whole patch, while the original covers nothing.

reports = [measure_coverage(pairs, rc.config, bundle) for rc in outcome.configs]
ratios = np.array([r.ratio for r in reports])
print("per config:", np.round(ratios, 3))
print("together:", aggregate_coverage(reports).ratio)
print("original:", measure_coverage(pairs, original, bundle).ratio)
