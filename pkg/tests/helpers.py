"""Shared plumbing for running fixtures through the pipeline."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from confrepair.cli import repair_report
from confrepair.configfile import ConfigFile
from confrepair.coverage import measure_coverage
from confrepair.fixtures import FixtureTree, generate_random_fixture
from confrepair.kconfig import value_env
from confrepair.logic import FALSE, TRUE, Const, substitute, truth_table
from confrepair.patch import PatchLineSet, patch_lines_from_text
from confrepair.repair import ConstraintBundle, Optimizations, RepairOutcome, krepair, load_bundle

CORPUS_SEEDS = range(500)


@dataclass
class Run:
    fixture: FixtureTree
    bundle: ConstraintBundle
    pairs: PatchLineSet
    config: ConfigFile
    outcome: RepairOutcome
    seconds: float

    def report_bytes(self) -> bytes:
        paths = [f"repaired-{k}.config" for k in range(1, len(self.outcome.configs) + 1)]
        return json.dumps(repair_report(self.outcome, self.config, self.bundle, paths), sort_keys=True).encode()

    def config_bytes(self) -> list[bytes]:
        return [rc.config.deparse(self.bundle.spec).encode() for rc in self.outcome.configs]

    def coverage_bytes(self) -> list[bytes]:
        return [
            json.dumps(measure_coverage(self.pairs, rc.config, self.bundle).to_json(), sort_keys=True).encode()
            for rc in self.outcome.configs
        ]


def run_fixture(fixture: FixtureTree, *, optimizations=Optimizations(), cache=None) -> Run:
    start = time.perf_counter()
    bundle = load_bundle(fixture.tree(), fixture.kconfig_root, cache)
    pairs = patch_lines_from_text(fixture.patch)
    config = ConfigFile.parse(fixture.config)
    outcome = krepair(pairs, config, bundle, optimizations=optimizations)
    return Run(fixture, bundle, pairs, config, outcome, time.perf_counter() - start)


@lru_cache(maxsize=None)
def corpus() -> tuple[Run, ...]:
    return tuple(run_fixture(generate_random_fixture(seed)) for seed in CORPUS_SEEDS)


def holds_bruteforce(formula, spec, values) -> bool:
    """Evaluate ``formula`` at option ``values``; leftover token variables are existential."""
    env = value_env(spec, values)
    rest = substitute(formula, {k: TRUE if v else FALSE for k, v in env.items()})
    if isinstance(rest, Const):
        return rest.value
    return bool(np.any(truth_table(rest)))
