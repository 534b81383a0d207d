"""XML interchange format for FPD models.

The state section follows the published serialization proposal element
for element. Operators, resources, connectors, flows and usages are kept in
extension sections shaped after the state pattern. Output is UTF-8, LF line
endings, four-space indentation, fixed attribute order, and is
byte-deterministic.
"""

from __future__ import annotations

import warnings
import xml.etree.ElementTree as ET
from typing import Iterable, Optional

from fpd.model import (
    Characteristic,
    ConnectorKind,
    ConnectorNode,
    Flow,
    Identification,
    Model,
    Placement,
    Process,
    ProcessOperator,
    StateKind,
    StateNode,
    TechnicalResource,
    Usage,
    build_model,
    operator_io,
)


class XmlError(ValueError):
    pass


class MarkupError(XmlError):
    def __init__(self, line: int, col: int, reason: str = ""):
        self.line = line
        self.col = col
        super().__init__(f"malformed XML at line {line}, column {col}: {reason}".rstrip(": "))


class SchemaError(XmlError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class SchemaWarning(UserWarning):
    pass


INDENT = "    "

ATTRIBUTE_ORDER = {
    "process": ("id",),
    "systemLimit": ("id", "shortName"),
    "state": ("stateType", "placement", "refines"),
    "identification": (
        "uniqueIdent", "shortName", "longName", "versionNumber", "revisionNumber",
    ),
    "reference": ("id",),
    "assigned": ("id",),
    "exit": ("id",),
    "entry": ("id",),
    "characteristic": ("value", "unit"),
    "processOperator": ("decompositionRef",),
    "connector": ("connectorType",),
    "flow": ("id", "sourceRef", "targetRef"),
    "usage": ("id", "operatorRef", "resourceRef"),
}

# Written as <tag></tag> even when empty; every other childless tag self-closes.
CONTAINER_TAGS = frozenset({
    "fpd", "process", "states", "state", "identification", "references",
    "characteristics", "characteristic", "assignments", "flows",
    "processOperators", "processOperator", "technicalResources",
    "technicalResource", "connectors", "connector", "usages",
})


# -- emitting -------------------------------------------------------------

def _escape_attr(value: str) -> str:
    return (
        value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        .replace('"', "&quot;").replace("\t", "&#9;").replace("\n", "&#10;")
        .replace("\r", "&#13;")
    )


def _escape_text(value: str) -> str:
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _ordered_attrs(elem: ET.Element) -> list[tuple[str, str]]:
    known = ATTRIBUTE_ORDER.get(elem.tag, ())
    items = [(k, elem.attrib[k]) for k in known if k in elem.attrib]
    items += sorted((k, v) for k, v in elem.attrib.items() if k not in known)
    return items


def _emit(elem: ET.Element, depth: int, out: list[str]) -> None:
    pad = INDENT * depth
    attrs = "".join(f' {k}="{_escape_attr(v)}"' for k, v in _ordered_attrs(elem))
    text = (elem.text or "").strip()
    children = list(elem)
    if not children and not text:
        if elem.tag in CONTAINER_TAGS:
            out.append(f"{pad}<{elem.tag}{attrs}></{elem.tag}>")
        else:
            out.append(f"{pad}<{elem.tag}{attrs} />")
        return
    if not children:
        out.append(f"{pad}<{elem.tag}{attrs}>{_escape_text(text)}</{elem.tag}>")
        return
    out.append(f"{pad}<{elem.tag}{attrs}>")
    if text:
        out.append(INDENT * (depth + 1) + _escape_text(text))
    for child in children:
        _emit(child, depth + 1, out)
        tail = (child.tail or "").strip()
        if tail:
            out.append(INDENT * (depth + 1) + _escape_text(tail))
    out.append(f"{pad}</{elem.tag}>")


def _to_text(root: ET.Element) -> str:
    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    _emit(root, 0, out)
    return "\n".join(out) + "\n"


# -- model -> tree ----------------------------------------------------------

def _identification(ident: Identification) -> ET.Element:
    e = ET.Element("identification", {
        "uniqueIdent": ident.unique_ident,
        "shortName": ident.short_name,
        "longName": ident.long_name,
        "versionNumber": ident.version_number,
        "revisionNumber": ident.revision_number,
    })
    refs = ET.SubElement(e, "references")
    for r in ident.references:
        ET.SubElement(refs, "reference", {"id": r})
    return e


def _characteristics(chars: Iterable[Characteristic]) -> ET.Element:
    e = ET.Element("characteristics")
    for c in chars:
        ce = ET.SubElement(e, "characteristic", {"value": c.value, "unit": c.unit})
        ce.append(_identification(c.identification))
        ce.append(_characteristics(c.children))
    return e


def _process_element(process: Process) -> ET.Element:
    pe = ET.Element("process", {"id": process.id})
    ident = process.identification
    if ident.long_name or ident.version_number or ident.revision_number or ident.references:
        pe.append(_identification(ident))
    ET.SubElement(pe, "systemLimit", {
        "id": process.system_boundary_id, "shortName": process.name,
    })

    assigned: dict[str, list[str]] = {s.id: [] for s in process.states}
    for op in process.operators:
        inputs, outputs = operator_io(op, process)
        for s in {x.id for x in inputs} | {x.id for x in outputs}:
            assigned[s].append(op.id)

    states = ET.SubElement(pe, "states")
    for s in process.states:
        attrs = {"stateType": s.kind.value}
        if s.placement is not Placement.BOUNDARY:
            attrs["placement"] = s.placement.value
        if s.refines is not None:
            attrs["refines"] = s.refines
        se = ET.SubElement(states, "state", attrs)
        se.append(_identification(s.identification))
        se.append(_characteristics(s.characteristics))
        assignments = ET.SubElement(se, "assignments")
        for op_id in assigned[s.id]:
            ET.SubElement(assignments, "assigned", {"id": op_id})
        flows = ET.SubElement(se, "flows")
        for f in process.outgoing[s.id]:
            ET.SubElement(ET.SubElement(flows, "flow"), "exit", {"id": f.id})
        for f in process.incoming[s.id]:
            ET.SubElement(ET.SubElement(flows, "flow"), "entry", {"id": f.id})

    ops = ET.SubElement(pe, "processOperators")
    for op in process.operators:
        attrs = {"decompositionRef": op.decomposition} if op.decomposition is not None else {}
        oe = ET.SubElement(ops, "processOperator", attrs)
        oe.append(_identification(op.identification))
        oe.append(_characteristics(op.characteristics))

    res = ET.SubElement(pe, "technicalResources")
    for r in process.resources:
        re_ = ET.SubElement(res, "technicalResource")
        re_.append(_identification(r.identification))
        re_.append(_characteristics(r.characteristics))

    conns = ET.SubElement(pe, "connectors")
    for c in process.connectors:
        ce = ET.SubElement(conns, "connector", {"connectorType": c.kind.value})
        ce.append(_identification(c.identification))

    flows = ET.SubElement(pe, "flows")
    for f in process.flows:
        ET.SubElement(flows, "flow", {"id": f.id, "sourceRef": f.source, "targetRef": f.target})

    usages = ET.SubElement(pe, "usages")
    for u in process.usages:
        ET.SubElement(usages, "usage", {
            "id": u.id, "operatorRef": u.operator, "resourceRef": u.resource,
        })
    return pe


def to_element(model: Model) -> ET.Element:
    root = ET.Element("fpd")
    for p in model.processes:
        root.append(_process_element(p))
    return root


def serialize(model: Model) -> str:
    """Render ``model`` as canonical interchange XML text."""
    return _to_text(to_element(model))


def canonicalize(doc: str | bytes) -> str:
    """Re-emit any well-formed document with the serializer's conventions.

    Whitespace-only text is dropped, attributes are put in the serializer's
    order, and a bare ``process`` root is wrapped in ``fpd``.
    """
    root = _parse_markup(doc)
    if root.tag == "process":
        wrapper = ET.Element("fpd")
        wrapper.append(root)
        root = wrapper
    return _to_text(root)


# -- tree -> model ----------------------------------------------------------

def _parse_markup(doc: str | bytes) -> ET.Element:
    try:
        return ET.fromstring(doc)
    except ET.ParseError as exc:
        line, col = exc.position
        raise MarkupError(line, col + 1, str(exc)) from None


class _Reader:
    def __init__(self, lenient: bool):
        self.lenient = lenient
        self.warnings: list[str] = []

    def problem(self, path: str, reason: str) -> None:
        if not self.lenient:
            raise SchemaError(path, reason)
        self.warnings.append(f"{path}: {reason}")
        warnings.warn(f"{path}: {reason}", SchemaWarning, stacklevel=4)

    def attrs(self, e: ET.Element, path: str, required: tuple[str, ...] = (),
              optional: tuple[str, ...] = ()) -> dict[str, str]:
        for k in e.attrib:
            if k not in required and k not in optional:
                self.problem(path, f"unknown attribute {k!r}")
        for k in required:
            if k not in e.attrib:
                raise SchemaError(path, f"missing attribute {k!r}")
        if (e.text or "").strip():
            self.problem(path, "unexpected text content")
        return dict(e.attrib)

    def children(self, e: ET.Element, path: str, allowed: tuple[str, ...]) -> list[ET.Element]:
        kept = []
        for c in e:
            if (c.tail or "").strip():
                self.problem(path, "unexpected text content")
            if c.tag in allowed:
                kept.append(c)
            else:
                self.problem(f"{path}/{c.tag}", "unknown element")
        return kept

    def single(self, e: ET.Element, path: str, tag: str,
               required: bool = True) -> Optional[ET.Element]:
        found = [c for c in e if c.tag == tag]
        if len(found) > 1:
            raise SchemaError(f"{path}/{tag}", "element must appear at most once")
        if not found:
            if required:
                raise SchemaError(f"{path}/{tag}", "missing element")
            return None
        return found[0]

    def identification(self, e: ET.Element, path: str) -> Identification:
        ie = self.single(e, path, "identification")
        ipath = f"{path}/identification"
        a = self.attrs(ie, ipath, ("uniqueIdent",),
                       ("shortName", "longName", "versionNumber", "revisionNumber"))
        if not a["uniqueIdent"]:
            raise SchemaError(ipath, "empty uniqueIdent")
        refs: list[str] = []
        self.children(ie, ipath, ("references",))
        re_ = self.single(ie, ipath, "references", required=False)
        if re_ is not None:
            rpath = f"{ipath}/references"
            self.attrs(re_, rpath)
            for r in self.children(re_, rpath, ("reference",)):
                refs.append(self.attrs(r, f"{rpath}/reference", ("id",))["id"])
        return Identification(
            a["uniqueIdent"], a.get("shortName", ""), a.get("longName", ""),
            a.get("versionNumber", ""), a.get("revisionNumber", ""), tuple(refs),
        )

    def characteristics(self, e: ET.Element, path: str) -> tuple[Characteristic, ...]:
        ce = self.single(e, path, "characteristics", required=False)
        if ce is None:
            return ()
        cpath = f"{path}/characteristics"
        self.attrs(ce, cpath)
        result = []
        for i, c in enumerate(self.children(ce, cpath, ("characteristic",))):
            p = f"{cpath}/characteristic[{i}]"
            a = self.attrs(c, p, (), ("value", "unit"))
            self.children(c, p, ("identification", "characteristics"))
            result.append(Characteristic(
                self.identification(c, p), a.get("value", ""), a.get("unit", ""),
                self.characteristics(c, p),
            ))
        return tuple(result)

    def section(self, pe: ET.Element, path: str, tag: str, item: str) -> list[tuple[str, ET.Element]]:
        se = self.single(pe, path, tag, required=False)
        if se is None:
            return []
        spath = f"{path}/{tag}"
        self.attrs(se, spath)
        return [(f"{spath}/{item}[{i}]", c)
                for i, c in enumerate(self.children(se, spath, (item,)))]

    def process(self, pe: ET.Element, path: str) -> tuple[Process, list]:
        a = self.attrs(pe, path, ("id",))
        self.children(pe, path, (
            "identification", "systemLimit", "states", "processOperators",
            "technicalResources", "connectors", "flows", "usages",
        ))
        sl = self.single(pe, path, "systemLimit", required=False)
        boundary, name = "", ""
        if sl is not None:
            sla = self.attrs(sl, f"{path}/systemLimit", ("id",), ("shortName",))
            boundary, name = sla["id"], sla.get("shortName", "")
        if self.single(pe, path, "identification", required=False) is not None:
            ident = self.identification(pe, path)
            if ident.unique_ident != a["id"] or ident.short_name != name:
                self.problem(f"{path}/identification",
                             "does not agree with process id / systemLimit shortName")
            ident = Identification(a["id"], name, ident.long_name, ident.version_number,
                                   ident.revision_number, ident.references)
        else:
            ident = Identification(a["id"], name)

        states, derived = [], []
        for spath, se in self.section(pe, path, "states", "state"):
            sa = self.attrs(se, spath, ("stateType",), ("placement", "refines"))
            try:
                kind = StateKind(sa["stateType"])
            except ValueError:
                raise SchemaError(spath, f"invalid stateType {sa['stateType']!r}") from None
            try:
                placement = Placement(sa.get("placement", "boundary"))
            except ValueError:
                raise SchemaError(spath, f"invalid placement {sa['placement']!r}") from None
            self.children(se, spath, ("identification", "characteristics",
                                      "assignments", "flows"))
            state = StateNode(self.identification(se, spath), kind, placement,
                              self.characteristics(se, spath), sa.get("refines"))
            states.append(state)
            derived.append((spath, state.id, self._state_links(se, spath)))

        operators = []
        for opath, oe in self.section(pe, path, "processOperators", "processOperator"):
            oa = self.attrs(oe, opath, (), ("decompositionRef",))
            self.children(oe, opath, ("identification", "characteristics"))
            operators.append(ProcessOperator(self.identification(oe, opath),
                                             self.characteristics(oe, opath),
                                             oa.get("decompositionRef")))
        resources = []
        for rpath, re_ in self.section(pe, path, "technicalResources", "technicalResource"):
            self.attrs(re_, rpath)
            self.children(re_, rpath, ("identification", "characteristics"))
            resources.append(TechnicalResource(self.identification(re_, rpath),
                                               self.characteristics(re_, rpath)))
        connectors = []
        for cpath, ce in self.section(pe, path, "connectors", "connector"):
            ca = self.attrs(ce, cpath, ("connectorType",))
            try:
                ckind = ConnectorKind(ca["connectorType"])
            except ValueError:
                raise SchemaError(cpath, f"invalid connectorType {ca['connectorType']!r}") from None
            self.children(ce, cpath, ("identification",))
            connectors.append(ConnectorNode(self.identification(ce, cpath), ckind))
        flows = []
        for fpath, fe in self.section(pe, path, "flows", "flow"):
            fa = self.attrs(fe, fpath, ("id", "sourceRef", "targetRef"))
            self.children(fe, fpath, ())
            flows.append(Flow(fa["id"], fa["sourceRef"], fa["targetRef"]))
        usages = []
        for upath, ue in self.section(pe, path, "usages", "usage"):
            ua = self.attrs(ue, upath, ("id", "operatorRef", "resourceRef"))
            self.children(ue, upath, ())
            usages.append(Usage(ua["id"], ua["operatorRef"], ua["resourceRef"]))

        process = Process(ident, boundary, tuple(states), tuple(operators),
                          tuple(resources), tuple(connectors), tuple(flows), tuple(usages))
        return process, derived

    def _state_links(self, se: ET.Element, spath: str):
        assigned: list[str] = []
        ae = self.single(se, spath, "assignments", required=False)
        if ae is not None:
            apath = f"{spath}/assignments"
            self.attrs(ae, apath)
            for c in self.children(ae, apath, ("assigned",)):
                assigned.append(self.attrs(c, f"{apath}/assigned", ("id",))["id"])
        links: list[tuple[str, str]] = []
        fe = self.single(se, spath, "flows", required=False)
        if fe is not None:
            fpath = f"{spath}/flows"
            self.attrs(fe, fpath)
            for c in self.children(fe, fpath, ("flow",)):
                self.attrs(c, f"{fpath}/flow")
                for leaf in self.children(c, f"{fpath}/flow", ("exit", "entry")):
                    ident = self.attrs(leaf, f"{fpath}/flow/{leaf.tag}", ("id",))["id"]
                    links.append((leaf.tag, ident))
        return assigned, links


def deserialize(doc: str | bytes, lenient: bool = False) -> Model:
    """Read interchange XML back into a built :class:`Model`.

    Strict mode raises :class:`SchemaError` for unknown elements or
    attributes and for state assignment/flow lists that disagree with the
    flow graph. Lenient mode drops such content and emits
    :class:`SchemaWarning` instead. Reference errors surface as
    :class:`fpd.model.DanglingReference`.
    """
    root = _parse_markup(doc)
    reader = _Reader(lenient)
    if root.tag == "process":
        elems = [("/process", root)]
    elif root.tag == "fpd":
        reader.attrs(root, "/fpd")
        elems = [(f"/fpd/process[{i}]", e)
                 for i, e in enumerate(reader.children(root, "/fpd", ("process",)))]
        if not elems:
            raise SchemaError("/fpd", "no process element")
    else:
        raise SchemaError(f"/{root.tag}", "root element must be fpd or process")

    parsed = [reader.process(e, path) for path, e in elems]
    model = build_model(p for p, _ in parsed)

    for process, derived in parsed:
        p = model.process(process.id)
        expected_assigned: dict[str, list[str]] = {s.id: [] for s in p.states}
        for op in p.operators:
            ins, outs = operator_io(op, p)
            for s in {x.id for x in ins} | {x.id for x in outs}:
                expected_assigned[s].append(op.id)
        for spath, sid, (assigned, links) in derived:
            if assigned != expected_assigned[sid]:
                reader.problem(f"{spath}/assignments",
                               "assigned operators do not match the flow graph")
            expected = [("exit", f.id) for f in p.outgoing[sid]]
            expected += [("entry", f.id) for f in p.incoming[sid]]
            if links != expected:
                reader.problem(f"{spath}/flows",
                               "exit/entry ids do not match the flow graph (exits first)")
    return model
