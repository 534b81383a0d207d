"""Typed in-memory representation of Formalised Process Descriptions.

A :class:`Model` is built once through :func:`build_model`, which checks
structural integrity (ids, references, decomposition acyclicity). Rule
violations are not construction errors; they are reported by
:mod:`fpd.rules`. Built models are immutable and every query here is pure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Optional, Union


class ModelError(ValueError):
    """Structurally broken input rejected by :func:`build_model`."""


class DanglingReference(ModelError):
    def __init__(self, ident: str, context: str = ""):
        self.ident = ident
        self.context = context
        msg = f"dangling reference {ident!r}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class DuplicateId(ModelError):
    def __init__(self, ident: str):
        self.ident = ident
        super().__init__(f"duplicate id {ident!r}")


class DecompositionCycle(ModelError):
    def __init__(self, path: list[str]):
        self.path = list(path)
        super().__init__("decomposition cycle: " + " -> ".join(self.path))


class InvalidElement(ModelError):
    """Element that cannot exist in any model (empty id, self loop, ...)."""


class StateKind(str, enum.Enum):
    PRODUCT = "Product"
    ENERGY = "Energy"
    INFORMATION = "Information"


class Placement(str, enum.Enum):
    BOUNDARY = "boundary"
    INTERMEDIATE = "intermediate"


class ConnectorKind(str, enum.Enum):
    FORK = "Fork"
    JOIN = "Join"
    DECISION = "Decision"
    MERGE = "Merge"


@dataclass(frozen=True)
class Identification:
    unique_ident: str
    short_name: str = ""
    long_name: str = ""
    version_number: str = ""
    revision_number: str = ""
    references: tuple[str, ...] = ()


@dataclass(frozen=True)
class Characteristic:
    identification: Identification
    value: str = ""
    unit: str = ""
    children: tuple[Characteristic, ...] = ()

    @property
    def id(self) -> str:
        return self.identification.unique_ident

    def walk(self) -> Iterator[Characteristic]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class StateNode:
    identification: Identification
    kind: StateKind
    placement: Placement = Placement.BOUNDARY
    characteristics: tuple[Characteristic, ...] = ()
    refines: Optional[str] = None

    @property
    def id(self) -> str:
        return self.identification.unique_ident

    @property
    def name(self) -> str:
        return self.identification.short_name


@dataclass(frozen=True)
class ProcessOperator:
    identification: Identification
    characteristics: tuple[Characteristic, ...] = ()
    decomposition: Optional[str] = None

    @property
    def id(self) -> str:
        return self.identification.unique_ident

    @property
    def name(self) -> str:
        return self.identification.short_name


@dataclass(frozen=True)
class TechnicalResource:
    identification: Identification
    characteristics: tuple[Characteristic, ...] = ()

    @property
    def id(self) -> str:
        return self.identification.unique_ident

    @property
    def name(self) -> str:
        return self.identification.short_name


@dataclass(frozen=True)
class ConnectorNode:
    identification: Identification
    kind: ConnectorKind

    @property
    def id(self) -> str:
        return self.identification.unique_ident

    @property
    def name(self) -> str:
        return self.identification.short_name


@dataclass(frozen=True)
class Flow:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class Usage:
    id: str
    operator: str
    resource: str


Node = Union[StateNode, ProcessOperator, TechnicalResource, ConnectorNode]


class Path(NamedTuple):
    """Flow path whose interior nodes are all connectors."""

    origin: str
    connectors: tuple[str, ...]
    terminus: str


@dataclass(frozen=True)
class Process:
    identification: Identification
    system_boundary_id: str = ""
    states: tuple[StateNode, ...] = ()
    operators: tuple[ProcessOperator, ...] = ()
    resources: tuple[TechnicalResource, ...] = ()
    connectors: tuple[ConnectorNode, ...] = ()
    flows: tuple[Flow, ...] = ()
    usages: tuple[Usage, ...] = ()

    @property
    def id(self) -> str:
        return self.identification.unique_ident

    @property
    def name(self) -> str:
        return self.identification.short_name

    def nodes(self) -> Iterator[Node]:
        yield from self.states
        yield from self.operators
        yield from self.resources
        yield from self.connectors

    # Lookup tables. cached_property writes straight into __dict__, which
    # frozen dataclasses allow; they do not take part in equality.

    @cached_property
    def node_index(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes()}

    @cached_property
    def outgoing(self) -> dict[str, tuple[Flow, ...]]:
        out: dict[str, list[Flow]] = {n.id: [] for n in self.nodes()}
        for f in self.flows:
            out.setdefault(f.source, []).append(f)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def incoming(self) -> dict[str, tuple[Flow, ...]]:
        inc: dict[str, list[Flow]] = {n.id: [] for n in self.nodes()}
        for f in self.flows:
            inc.setdefault(f.target, []).append(f)
        return {k: tuple(v) for k, v in inc.items()}

    def node(self, ident: str) -> Optional[Node]:
        return self.node_index.get(ident)

    def is_state(self, ident: str) -> bool:
        return isinstance(self.node_index.get(ident), StateNode)

    def is_operator(self, ident: str) -> bool:
        return isinstance(self.node_index.get(ident), ProcessOperator)

    def is_connector(self, ident: str) -> bool:
        return isinstance(self.node_index.get(ident), ConnectorNode)

    @cached_property
    def paths(self) -> tuple[Path, ...]:
        return tuple(_enumerate_paths(self))


@dataclass(frozen=True)
class Model:
    processes: tuple[Process, ...]
    root_process_ids: tuple[str, ...] = field(default=())

    @cached_property
    def process_index(self) -> dict[str, Process]:
        return {p.id: p for p in self.processes}

    def process(self, ident: str) -> Process:
        return self.process_index[ident]

    @cached_property
    def parents(self) -> dict[str, tuple[tuple[Process, ProcessOperator], ...]]:
        """Map sub-process id to the (process, operator) pairs decomposing into it."""
        result: dict[str, list[tuple[Process, ProcessOperator]]] = {}
        for p in self.processes:
            for op in p.operators:
                if op.decomposition is not None:
                    result.setdefault(op.decomposition, []).append((p, op))
        return {k: tuple(v) for k, v in result.items()}

    def owner_of(self, ident: str) -> Optional[Process]:
        """Process containing the element (or being the process) with this id."""
        for p in self.processes:
            if p.id == ident or p.system_boundary_id == ident:
                return p
            if ident in p.node_index:
                return p
            if any(f.id == ident for f in p.flows) or any(u.id == ident for u in p.usages):
                return p
            for n in p.nodes():
                for c in getattr(n, "characteristics", ()):
                    if any(x.id == ident for x in c.walk()):
                        return p
        return None

    def all_ids(self) -> set[str]:
        return set(_iter_ids(self.processes))


def _iter_ids(processes: Iterable[Process]) -> Iterator[str]:
    for p in processes:
        yield p.id
        if p.system_boundary_id:
            yield p.system_boundary_id
        for n in p.nodes():
            yield n.id
            for c in getattr(n, "characteristics", ()):
                for x in c.walk():
                    yield x.id
        for f in p.flows:
            yield f.id
        for u in p.usages:
            yield u.id


def build_model(processes: Iterable[Process]) -> Model:
    """Check raw processes and assemble a :class:`Model`.

    Raises :class:`DuplicateId`, :class:`DanglingReference` or
    :class:`DecompositionCycle` for structurally broken input, and
    :class:`InvalidElement` for empty ids or self-looping flows.
    """
    procs = tuple(processes)
    if not procs:
        raise InvalidElement("a model needs at least one process")

    seen: set[str] = set()
    for ident in _iter_ids(procs):
        if not ident:
            raise InvalidElement("empty uniqueIdent")
        if ident in seen:
            raise DuplicateId(ident)
        seen.add(ident)

    proc_ids = {p.id for p in procs}
    flow_kinds = (StateNode, ProcessOperator, ConnectorNode)
    for p in procs:
        index = {n.id: n for n in p.nodes()}
        for f in p.flows:
            for end in (f.source, f.target):
                if end not in index:
                    raise DanglingReference(end, f"flow {f.id} in process {p.id}")
                if not isinstance(index[end], flow_kinds):
                    raise DanglingReference(
                        end, f"flow {f.id} cannot connect a technical resource"
                    )
            if f.source == f.target:
                raise InvalidElement(f"flow {f.id} connects {f.source} to itself")
        for u in p.usages:
            # endpoint kinds are a rule matter (usage endpoint rule), not construction
            for end in (u.operator, u.resource):
                if end not in index:
                    raise DanglingReference(end, f"usage {u.id} in process {p.id}")
        for op in p.operators:
            if op.decomposition is not None and op.decomposition not in proc_ids:
                raise DanglingReference(op.decomposition, f"decomposition of {op.id}")

    _check_acyclic(procs)

    targets = {op.decomposition for p in procs for op in p.operators if op.decomposition}
    roots = tuple(p.id for p in procs if p.id not in targets)
    model = Model(procs, roots)

    for p in procs:
        parent_states: Optional[set[str]] = None
        for s in p.states:
            if s.refines is None:
                continue
            if parent_states is None:
                parent_states = {
                    ps.id for pp, _ in model.parents.get(p.id, ()) for ps in pp.states
                }
            if s.refines not in parent_states:
                raise DanglingReference(s.refines, f"refines of state {s.id}")
    return model


def _check_acyclic(procs: tuple[Process, ...]) -> None:
    edges = {
        p.id: [op.decomposition for op in p.operators if op.decomposition is not None]
        for p in procs
    }
    done: set[str] = set()
    for start in edges:
        if start in done:
            continue
        # iterative DFS keeping the active path for the error report
        stack = [(start, iter(edges[start]))]
        on_path = [start]
        active = {start}
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                on_path.pop()
                active.discard(node)
                done.add(node)
                continue
            if nxt in active:
                i = on_path.index(nxt)
                raise DecompositionCycle(on_path[i:] + [nxt])
            if nxt not in done:
                stack.append((nxt, iter(edges[nxt])))
                on_path.append(nxt)
                active.add(nxt)


def _enumerate_paths(process: Process) -> Iterator[Path]:
    is_conn = process.is_connector
    succ: dict[str, list[str]] = {}
    for f in process.flows:
        lst = succ.setdefault(f.source, [])
        if f.target not in lst:
            lst.append(f.target)

    starts = [n.id for n in process.nodes() if not isinstance(n, (TechnicalResource, ConnectorNode))]
    starts += [c.id for c in process.connectors if not process.incoming.get(c.id)]
    emitted: set[Path] = set()

    for origin in starts:
        # (node reached, connectors traversed before it)
        stack: list[tuple[str, tuple[str, ...]]] = [
            (t, ()) for t in reversed(succ.get(origin, []))
        ]
        while stack:
            node, via = stack.pop()
            if not is_conn(node):
                path = Path(origin, via, node)
            else:
                visited = set(via) | {node}
                if is_conn(origin):
                    visited.add(origin)
                nexts = [
                    t for t in succ.get(node, []) if not is_conn(t) or t not in visited
                ]
                if nexts:
                    stack.extend((t, via + (node,)) for t in reversed(nexts))
                    continue
                path = Path(origin, via, node)
            if path not in emitted:
                emitted.add(path)
                yield path


def flow_paths(process: Process) -> list[Path]:
    """Maximal flow paths whose interior nodes are connectors only.

    Origins are states, operators, or connectors without incoming flows.
    A path that cannot leave a connector ends there.
    """
    return list(process.paths)


def boundary_states(process: Process) -> tuple[list[StateNode], list[StateNode]]:
    inputs: list[StateNode] = []
    outputs: list[StateNode] = []
    for s in process.states:
        if s.placement is not Placement.BOUNDARY:
            continue
        has_in = bool(process.incoming.get(s.id))
        has_out = bool(process.outgoing.get(s.id))
        if has_out and not has_in:
            inputs.append(s)
        elif has_in and not has_out:
            outputs.append(s)
    return inputs, outputs


def operator_io(
    operator: ProcessOperator, process: Process
) -> tuple[list[StateNode], list[StateNode]]:
    """States entering and leaving an operator, looking through connectors."""
    in_ids: set[str] = set()
    out_ids: set[str] = set()
    for path in process.paths:
        if path.terminus == operator.id and process.is_state(path.origin):
            in_ids.add(path.origin)
        if path.origin == operator.id and process.is_state(path.terminus):
            out_ids.add(path.terminus)
    return (
        [s for s in process.states if s.id in in_ids],
        [s for s in process.states if s.id in out_ids],
    )


def resources_of(operator: ProcessOperator, process: Process) -> list[TechnicalResource]:
    result = []
    for u in process.usages:
        if u.operator == operator.id:
            node = process.node(u.resource)
            if isinstance(node, TechnicalResource):
                result.append(node)
    return result


def decomposition_of(operator: ProcessOperator, model: Model) -> Optional[Process]:
    if operator.decomposition is None:
        return None
    return model.process_index.get(operator.decomposition)


def decomposition_depth(process: Process, model: Model) -> int:
    """Process levels on the longest decomposition chain starting at ``process``.

    A process without decomposed operators has depth 1.
    """
    memo: dict[str, int] = {}

    def depth(p: Process) -> int:
        if p.id not in memo:
            subs = [model.process(op.decomposition) for op in p.operators if op.decomposition]
            memo[p.id] = 1 + max((depth(s) for s in subs), default=0)
        return memo[p.id]

    return depth(process)
