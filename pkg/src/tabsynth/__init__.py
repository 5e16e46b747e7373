"""Profile-driven synthetic tabular data: profiling, generation, prompts, fidelity and TSTR scoring."""

from __future__ import annotations

from .errors import TabsynthError
from .generator import GenerationConfig, generate, generate_with_manifest
from .metrics import FidelityReport, evaluate
from .model import ColumnSpec, Kind, Schema, Table, load_schema, load_table, save_schema, save_table
from .profile import ProfileOptions, StatisticalProfile, extract_profile, load_profile, save_profile
from .promptkit import ValidationReport, emit_prompt, validate_dataset

__version__ = "0.1.0"

__all__ = [
    "ColumnSpec", "FidelityReport", "GenerationConfig", "Kind", "ProfileOptions", "Schema",
    "StatisticalProfile", "Table", "TabsynthError", "ValidationReport", "emit_prompt", "evaluate",
    "extract_profile", "generate", "generate_with_manifest", "load_profile", "load_schema",
    "load_table", "save_profile", "save_schema", "save_table", "validate_dataset",
]
