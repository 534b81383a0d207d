"""Well-formedness rule catalog for FPD models.

Every rule is a pure function ``(model) -> iterable of Diagnostic``. The
catalog is ordered by rule number and rule ids are never renumbered.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Optional

from fpd.model import (
    ConnectorKind,
    ConnectorNode,
    Model,
    Placement,
    Process,
    ProcessOperator,
    StateNode,
    TechnicalResource,
    boundary_states,
    operator_io,
)


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"


class RuleId(enum.Enum):
    R1 = (1, "FLOW_STATE_TO_STATE")
    R2 = (2, "PROC_HAS_OPERATOR")
    R3 = (3, "STATE_ASSIGNED")
    R4 = (4, "PROC_MIN_STATES")
    R5 = (5, "BOUNDARY_STATE_DIRECTION")
    R6 = (6, "INTERMEDIATE_STATE_BOTH")
    R7 = (7, "OPERATOR_IO")
    R8 = (8, "USAGE_ENDPOINTS")
    R9 = (9, "DECOMP_CONSISTENCY")
    R10 = (10, "FLOW_ALTERNATION")
    R11 = (11, "PROC_HAS_BOUNDARY")
    R12 = (12, "CONNECTOR_ARITY")
    R13 = (13, "RESOURCE_USED")

    @property
    def number(self) -> int:
        return self.value[0]

    @property
    def title(self) -> str:
        return self.value[1]

    @classmethod
    def parse(cls, text: str) -> RuleId:
        """Accept ``R7``, ``7`` or ``OPERATOR_IO`` (case-insensitive)."""
        key = text.strip().upper()
        for rule in cls:
            if key in (rule.name, str(rule.number), rule.title):
                return rule
        raise ValueError(f"unknown rule {text!r}")

    def __lt__(self, other: RuleId) -> bool:
        return self.number < other.number


STATE_LINK_MESSAGE = (
    "A state must always be assigned a process operator. "
    "Linking two states is not permitted."
)


@dataclass(frozen=True)
class Diagnostic:
    rule: RuleId
    severity: Severity
    message: str
    elements: tuple[str, ...]
    process_id: str

    def sort_key(self) -> tuple:
        return (self.process_id, self.rule.number, self.elements[0] if self.elements else "")

    def to_record(self) -> dict:
        return {
            "rule": self.rule.name,
            "severity": self.severity.value,
            "processId": self.process_id,
            "elements": list(self.elements),
            "message": self.message,
        }


@dataclass(frozen=True)
class RuleConfig:
    disabled: frozenset[RuleId] = frozenset()
    severities: Mapping[RuleId, Severity] = field(default_factory=dict)

    def enabled(self, rule: RuleId) -> bool:
        return rule not in self.disabled

    def severity(self, rule: RuleId) -> Severity:
        return self.severities.get(rule, CATALOG[rule].severity)

    @classmethod
    def only(cls, rules: Iterable[RuleId], **kw) -> RuleConfig:
        keep = set(rules)
        return cls(disabled=frozenset(r for r in RuleId if r not in keep), **kw)


# A check yields (process id, element ids, message) triples.
Finding = tuple[str, tuple[str, ...], str]


@dataclass(frozen=True)
class RuleEntry:
    rule: RuleId
    description: str
    severity: Severity
    check: Callable[[Model], Iterable[Finding]]


def _label(process: Process, ident: str) -> str:
    node = process.node(ident)
    name = node.name if node is not None else ""
    return f"'{name}' ({ident})" if name else ident


def _kind_word(process: Process, ident: str) -> str:
    node = process.node(ident)
    if isinstance(node, StateNode):
        return "state"
    if isinstance(node, ProcessOperator):
        return "process operator"
    if isinstance(node, ConnectorNode):
        return node.kind.value.lower() + " node"
    if isinstance(node, TechnicalResource):
        return "technical resource"
    return "element"


def check_state_to_state(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        for f in p.flows:
            if p.is_state(f.source) and p.is_state(f.target):
                yield p.id, (f.id, f.source, f.target), STATE_LINK_MESSAGE


def check_has_operator(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        if not p.operators:
            yield p.id, (p.id,), f"Process {_plabel(p)} has no process operator."


def check_state_assigned(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        assigned: set[str] = set()
        for path in p.paths:
            if p.is_operator(path.terminus) and p.is_state(path.origin):
                assigned.add(path.origin)
            if p.is_operator(path.origin) and p.is_state(path.terminus):
                assigned.add(path.terminus)
        for s in p.states:
            if s.id not in assigned:
                yield p.id, (s.id,), (
                    f"State {_label(p, s.id)} is not assigned to any process operator."
                )


def check_min_states(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        inputs, outputs = boundary_states(p)
        problems = []
        if len(p.states) < 2:
            problems.append(f"has {len(p.states)} state(s), at least two are required")
        if not inputs:
            problems.append("has no boundary input state")
        if not outputs:
            problems.append("has no boundary output state")
        if problems:
            yield p.id, (p.id,), f"Process {_plabel(p)} " + "; ".join(problems) + "."


def check_boundary_direction(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        for s in p.states:
            if s.placement is Placement.BOUNDARY and p.incoming[s.id] and p.outgoing[s.id]:
                yield p.id, (s.id,), (
                    f"Boundary state {_label(p, s.id)} has both incoming and outgoing "
                    "flows; a state on the system boundary is either an input or an output."
                )


def check_intermediate_both(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        for s in p.states:
            if s.placement is not Placement.INTERMEDIATE:
                continue
            missing = [w for w, fl in (("incoming", p.incoming[s.id]),
                                       ("outgoing", p.outgoing[s.id])) if not fl]
            if missing:
                yield p.id, (s.id,), (
                    f"Intermediate state {_label(p, s.id)} has no "
                    + " and no ".join(missing) + " flow."
                )


def check_operator_io(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        for op in p.operators:
            inputs, outputs = operator_io(op, p)
            missing = [w for w, lst in (("input", inputs), ("output", outputs)) if not lst]
            if missing:
                yield p.id, (op.id,), (
                    f"Process operator {_label(p, op.id)} has no "
                    + " and no ".join(missing) + " state connected by a flow."
                )


def check_usage_endpoints(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        for u in p.usages:
            bad = []
            if not p.is_operator(u.operator):
                bad.append(f"{_label(p, u.operator)} is a {_kind_word(p, u.operator)}, "
                           "not a process operator")
            if not isinstance(p.node(u.resource), TechnicalResource):
                bad.append(f"{_label(p, u.resource)} is a {_kind_word(p, u.resource)}, "
                           "not a technical resource")
            if bad:
                yield p.id, (u.id, u.operator, u.resource), (
                    f"Usage {u.id} must join a process operator and a technical resource: "
                    + "; ".join(bad) + "."
                )


def _correspondent(
    sub_state: StateNode, candidates: list[StateNode]
) -> tuple[Optional[StateNode], str]:
    if sub_state.refines is not None:
        for c in candidates:
            if c.id == sub_state.refines:
                if c.kind is sub_state.kind:
                    return c, ""
                return None, f"refines {c.id} of kind {c.kind.value}"
        return None, f"refines {sub_state.refines}, which is not on this side of the operator"
    matches = [c for c in candidates
               if c.kind is sub_state.kind and c.name == sub_state.name]
    if len(matches) == 1:
        return matches[0], ""
    if not matches:
        return None, "has no counterpart of equal kind and name"
    return None, "matches several states by kind and name"


def check_decomposition(model: Model) -> Iterator[Finding]:
    for parent in model.processes:
        for op in parent.operators:
            if op.decomposition is None:
                continue
            sub = model.process(op.decomposition)
            op_in, op_out = operator_io(op, parent)
            sub_in, sub_out = boundary_states(sub)
            for side, sub_states, candidates in (
                ("input", sub_in, op_in), ("output", sub_out, op_out)
            ):
                for s in sub_states:
                    match, why = _correspondent(s, candidates)
                    if match is None:
                        yield sub.id, (s.id, op.id), (
                            f"Boundary {side} {_label(sub, s.id)} of decomposition "
                            f"{_plabel(sub)} does not correspond to an {side} of operator "
                            f"{_label(parent, op.id)}: {why}."
                        )


def check_flow_alternation(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        for path in p.paths:
            o, t = path.origin, path.terminus
            if (p.is_state(o) and p.is_operator(t)) or (p.is_operator(o) and p.is_state(t)):
                continue
            route = " -> ".join(_label(p, x) for x in (o, *path.connectors, t))
            if p.is_connector(t) or p.is_connector(o):
                why = "dead-ends at a connector node"
            else:
                why = f"runs from a {_kind_word(p, o)} to a {_kind_word(p, t)}"
            yield p.id, (o, *path.connectors, t), (
                f"Flow path {route} {why}; flows must alternate between states "
                "and process operators."
            )


def check_has_boundary(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        if not p.system_boundary_id:
            yield p.id, (p.id,), f"Process {_plabel(p)} declares no system boundary."


_ARITY = {
    ConnectorKind.FORK: ("1", "at least 2"),
    ConnectorKind.JOIN: ("at least 2", "1"),
    ConnectorKind.DECISION: ("1", "at least 2"),
    ConnectorKind.MERGE: ("at least 2", "1"),
}


def _arity_ok(spec: str, n: int) -> bool:
    return n == 1 if spec == "1" else n >= 2


def check_connector_arity(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        for c in p.connectors:
            want_in, want_out = _ARITY[c.kind]
            n_in, n_out = len(p.incoming[c.id]), len(p.outgoing[c.id])
            if not (_arity_ok(want_in, n_in) and _arity_ok(want_out, n_out)):
                yield p.id, (c.id,), (
                    f"{c.kind.value} node {_label(p, c.id)} has {n_in} incoming and "
                    f"{n_out} outgoing flows; expected {want_in} incoming and "
                    f"{want_out} outgoing."
                )


def check_resource_used(model: Model) -> Iterator[Finding]:
    for p in model.processes:
        used = {u.resource for u in p.usages} | {u.operator for u in p.usages}
        for r in p.resources:
            if r.id not in used:
                yield p.id, (r.id,), (
                    f"Technical resource {_label(p, r.id)} is not used by any process operator."
                )


def _plabel(p: Process) -> str:
    return f"'{p.name}' ({p.id})" if p.name else p.id


_E, _W = Severity.ERROR, Severity.WARNING

CATALOG: dict[RuleId, RuleEntry] = {
    e.rule: e
    for e in [
        RuleEntry(RuleId.R1, "No flow may connect a state directly to another state.",
                  _E, check_state_to_state),
        RuleEntry(RuleId.R2, "Every process contains at least one process operator.",
                  _E, check_has_operator),
        RuleEntry(RuleId.R3, "Every state is connected by flows (possibly through "
                  "connectors) to at least one process operator.", _E, check_state_assigned),
        RuleEntry(RuleId.R4, "Every process has at least two states, including at least "
                  "one boundary input and one boundary output.", _E, check_min_states),
        RuleEntry(RuleId.R5, "A boundary state has flows in one direction only.",
                  _E, check_boundary_direction),
        RuleEntry(RuleId.R6, "An intermediate state has at least one incoming and one "
                  "outgoing flow.", _E, check_intermediate_both),
        RuleEntry(RuleId.R7, "Every process operator has at least one input state and one "
                  "output state.", _E, check_operator_io),
        RuleEntry(RuleId.R8, "Every usage joins one process operator and one technical "
                  "resource.", _E, check_usage_endpoints),
        RuleEntry(RuleId.R9, "Boundary states of a decomposition correspond to the inputs "
                  "and outputs of the decomposed operator.", _E, check_decomposition),
        RuleEntry(RuleId.R10, "Every flow path runs from a state to a process operator or "
                  "from a process operator to a state.", _E, check_flow_alternation),
        RuleEntry(RuleId.R11, "Every process declares exactly one system boundary.",
                  _E, check_has_boundary),
        RuleEntry(RuleId.R12, "Fork and decision nodes have 1 incoming and at least 2 "
                  "outgoing flows; join and merge nodes the reverse.", _E,
                  check_connector_arity),
        RuleEntry(RuleId.R13, "Every technical resource is used by a process operator.",
                  _W, check_resource_used),
    ]
}


def list_rules() -> list[tuple[RuleId, str, Severity]]:
    return [(e.rule, e.description, e.severity) for e in CATALOG.values()]


def _run(model: Model, rule: RuleId, severity: Severity) -> list[Diagnostic]:
    return [
        Diagnostic(rule, severity, message, elements, pid)
        for pid, elements, message in CATALOG[rule].check(model)
    ]


def check_rule(model: Model, rule: RuleId) -> list[Diagnostic]:
    diags = _run(model, rule, CATALOG[rule].severity)
    diags.sort(key=Diagnostic.sort_key)
    return diags


def validate(model: Model, config: Optional[RuleConfig] = None) -> list[Diagnostic]:
    """Evaluate every enabled rule and return diagnostics in stable order.

    Ordering is by process id, then rule number, then first element id;
    ties keep discovery order.
    """
    config = config or RuleConfig()
    diags: list[Diagnostic] = []
    for rule in RuleId:
        if config.enabled(rule):
            diags.extend(_run(model, rule, config.severity(rule)))
    diags.sort(key=Diagnostic.sort_key)
    return diags
