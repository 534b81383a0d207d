"""Toolchain for VDI/VDE 3682 Formalised Process Descriptions (FPD)."""

from importlib import resources

from fpd.model import (
    Characteristic,
    ConnectorKind,
    ConnectorNode,
    DanglingReference,
    DecompositionCycle,
    DuplicateId,
    Flow,
    Identification,
    Model,
    ModelError,
    Path,
    Placement,
    Process,
    ProcessOperator,
    StateKind,
    StateNode,
    TechnicalResource,
    Usage,
    boundary_states,
    build_model,
    decomposition_of,
    flow_paths,
    operator_io,
    resources_of,
)
from fpd.rules import Diagnostic, RuleConfig, RuleId, Severity, check_rule, list_rules, validate
from fpd.script import ParseError, ParseFailure, parse, print_model
from fpd.xmlio import MarkupError, SchemaError, canonicalize, deserialize, serialize

__version__ = "0.1.0"


def fixture_text(name: str = "collar.fpd") -> str:
    """Source of a bundled example model (``collar.fpd`` or ``collar_decomposed.fpd``)."""
    return resources.files("fpd").joinpath("data", name).read_text(encoding="utf-8")


def load_fixture(name: str = "collar.fpd") -> Model:
    return parse(fixture_text(name), name)
