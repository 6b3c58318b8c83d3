"""Configuration repair for patch coverage.

Given a patched kernel-style source tree, a patch and an existing
``.config``, :func:`krepair` produces the few configuration files that
together build every changed line while changing as few settings as it can.
"""

__version__ = "0.1.0"

from .configfile import ConfigFile, config_diff
from .coverage import CoverageReport, aggregate_coverage, measure_coverage
from .kconfig import KconfigSpec, normalize_config, parse_kconfig, spec_to_formula
from .patch import PatchLine, PatchLineSet, parse_patch, patch_lines, patch_lines_from_text
from .repair import ConstraintBundle, Optimizations, RepairOutcome, get_constraint, krepair, load_bundle, repair_one
from .tree import Tree

__all__ = [
    "ConfigFile",
    "ConstraintBundle",
    "CoverageReport",
    "KconfigSpec",
    "Optimizations",
    "PatchLine",
    "PatchLineSet",
    "RepairOutcome",
    "Tree",
    "aggregate_coverage",
    "config_diff",
    "get_constraint",
    "krepair",
    "load_bundle",
    "measure_coverage",
    "normalize_config",
    "parse_kconfig",
    "parse_patch",
    "patch_lines",
    "patch_lines_from_text",
    "repair_one",
    "spec_to_formula",
]
