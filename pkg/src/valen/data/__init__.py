from .types import (
    AttributeTuple,
    DatasetManifest,
    ReasoningInstance,
    RuleMetadata,
    SHAPE_TYPES,
    RULE_NAMES,
)
from .render import render_panel, PANEL_SIZE
from .rpm import RpmConfig, generate_rpm_dataset, check_rpm_instance, rule_consistent_panels
from .bongard import BongardConfig, generate_bongard_dataset, CONCEPT_BANK
from .io import save_dataset, load_dataset

__all__ = [
    "AttributeTuple",
    "DatasetManifest",
    "ReasoningInstance",
    "RuleMetadata",
    "SHAPE_TYPES",
    "RULE_NAMES",
    "render_panel",
    "PANEL_SIZE",
    "RpmConfig",
    "generate_rpm_dataset",
    "check_rpm_instance",
    "rule_consistent_panels",
    "BongardConfig",
    "generate_bongard_dataset",
    "CONCEPT_BANK",
    "save_dataset",
    "load_dataset",
]
