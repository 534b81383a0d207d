"""FPDScript: a plain-text authoring format for FPD models.

Example::

    process "Collar Screwing" {
        product Collar in
        operator "Automated Collar Screwing"
        product "Screwed Collar" out
        flow Collar -> "Automated Collar Screwing"
        flow "Automated Collar Screwing" -> "Screwed Collar"
    }

Statements end at a newline or ``;``. Names are bare identifiers or
double-quoted strings. References resolve by id first, then by unique
short name. Omitted ids are generated as ``<kind><ordinal>`` where the
ordinal counts elements of that kind in document order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

from fpd.model import (
    Characteristic,
    ConnectorKind,
    ConnectorNode,
    Flow,
    Identification,
    Model,
    ModelError,
    Placement,
    Process,
    ProcessOperator,
    StateKind,
    StateNode,
    TechnicalResource,
    Usage,
    build_model,
)


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    expected: tuple[str, ...]
    found: str
    hint: Optional[str] = None

    def __str__(self) -> str:
        msg = f"{self.span}: expected {' or '.join(self.expected)}, found {self.found}"
        if self.hint:
            msg += f" ({self.hint})"
        return msg


class ParseFailure(Exception):
    """Raised by :func:`parse` with every error found in the source."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("\n".join(str(e) for e in errors))


# -- lexing -----------------------------------------------------------------

STATE_KEYWORDS = {"product": StateKind.PRODUCT, "energy": StateKind.ENERGY,
                  "information": StateKind.INFORMATION}
CONNECTOR_KEYWORDS = {"fork": ConnectorKind.FORK, "join": ConnectorKind.JOIN,
                      "decision": ConnectorKind.DECISION, "merge": ConnectorKind.MERGE}
DIRECTIONS = ("in", "out", "internal")
OPTION_KEYS = ("id", "long", "version", "revision", "ref", "boundary")
KEYWORDS = frozenset(
    ["process", "operator", "resource", "flow", "usage", "char", "unit",
     "refines", "decompose", *STATE_KEYWORDS, *CONNECTOR_KEYWORDS, *DIRECTIONS,
     *OPTION_KEYS]
)

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>"(?:[^"\\\n]|\\.)*)
  | (?P<arrow>->)
  | (?P<dashdash>--)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<punct>[{};=])
  | (?P<other>.)
""", re.VERBOSE)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident, string, arrow, dashdash, {, }, ;, =, newline, eof, error
    value: str
    line: int
    col: int
    end_line: int
    end_col: int

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        if self.kind == "newline":
            return "end of line"
        if self.kind == "string":
            return f"string {quote(self.value)}"
        if self.kind == "ident":
            return f"'{self.value}'"
        return f"'{self.value}'"


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


def tokenize(text: str) -> tuple[list[Token], list[tuple[Token, str]]]:
    tokens: list[Token] = []
    problems: list[tuple[Token, str]] = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        raw = m.group()
        col = m.start() - line_start + 1
        end_col = col + max(len(raw), 1) - 1
        if kind in ("ws", "comment"):
            continue
        if kind == "newline":
            tokens.append(Token("newline", raw, line, col, line, col))
            line += 1
            line_start = m.end()
            continue
        if kind == "string":
            tok = Token("string", _unescape(raw[1:-1]), line, col, line, end_col)
        elif kind == "badstring":
            tok = Token("error", raw, line, col, line, end_col)
            problems.append((tok, "unterminated string"))
        elif kind == "punct":
            tok = Token(raw, raw, line, col, line, end_col)
        elif kind == "other":
            tok = Token("error", raw, line, col, line, end_col)
            problems.append((tok, f"unexpected character {raw!r}"))
        else:
            tok = Token(kind, raw, line, col, line, end_col)
        tokens.append(tok)
    last_col = len(text) - line_start + 1
    tokens.append(Token("eof", "", line, max(last_col, 1), line, max(last_col, 1)))
    return tokens, problems


def quote(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"')
    out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{out}"'


def name_token(text: str) -> str:
    """Bare identifier when unambiguous, quoted string otherwise."""
    if IDENT_RE.fullmatch(text) and text not in KEYWORDS:
        return text
    return quote(text)


# -- syntax tree ------------------------------------------------------------

@dataclass
class Ref:
    text: str
    token: Token


@dataclass
class IdentDecl:
    name: str
    explicit_id: Optional[str] = None
    long_name: str = ""
    version: str = ""
    revision: str = ""
    references: list[str] = field(default_factory=list)
    boundary: Optional[str] = None
    token: Optional[Token] = None


@dataclass
class CharDecl:
    ident: IdentDecl
    value: str
    unit: str
    children: list[CharDecl]


@dataclass
class Decl:
    keyword: str
    ident: IdentDecl
    direction: Optional[str] = None
    refines: Optional[Ref] = None
    decompose: Optional[Ref] = None
    chars: list[CharDecl] = field(default_factory=list)


@dataclass
class EdgeDecl:
    keyword: str  # flow | usage
    source: Ref
    target: Ref
    explicit_id: Optional[str]
    token: Token


@dataclass
class ProcessDecl:
    ident: IdentDecl
    decls: list[Decl] = field(default_factory=list)
    edges: list[EdgeDecl] = field(default_factory=list)


class _Abort(Exception):
    pass


class Parser:
    """Recursive-descent parser with recovery at statement boundaries."""

    def __init__(self, text: str, filename: str = "<input>"):
        self.filename = filename
        self.tokens, lex_problems = tokenize(text)
        self.pos = 0
        self.errors: list[ParseError] = []
        for tok, msg in lex_problems:
            self.errors.append(ParseError(self.span(tok), ("valid token",), tok.describe(), msg))

    # token helpers

    def span(self, tok: Token) -> SourceSpan:
        return SourceSpan(self.filename, tok.line, tok.col, tok.end_line, tok.end_col)

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        return self.tok.kind == "ident" and self.tok.value in words

    def fail(self, expected: tuple[str, ...], hint: Optional[str] = None,
             tok: Optional[Token] = None) -> _Abort:
        tok = tok or self.tok
        self.errors.append(ParseError(self.span(tok), expected, tok.describe(), hint))
        return _Abort()

    def skip_errors(self) -> None:
        while self.tok.kind == "error":
            self.advance()

    def skip_newlines(self) -> None:
        while self.tok.kind in ("newline", ";", "error"):
            self.advance()

    def expect(self, kind: str, label: str) -> Token:
        self.skip_errors()
        if self.tok.kind != kind:
            raise self.fail((label,))
        return self.advance()

    def expect_end(self) -> None:
        self.skip_errors()
        if self.tok.kind in ("newline", ";"):
            self.advance()
        elif self.tok.kind not in ("}", "eof"):
            raise self.fail(("end of statement",))

    def recover(self) -> None:
        """Skip to the end of the current statement, honouring nested braces."""
        depth = 0
        while self.tok.kind != "eof":
            kind = self.tok.kind
            if depth == 0 and kind in ("newline", ";"):
                self.advance()
                return
            if depth == 0 and kind == "}":
                return
            if kind == "{":
                depth += 1
            elif kind == "}":
                depth -= 1
            self.advance()

    # grammar

    def parse_document(self) -> list[ProcessDecl]:
        processes = []
        self.skip_newlines()
        if self.tok.kind == "eof":
            self.fail(("'process'",))
            return processes
        while self.tok.kind != "eof":
            start = self.pos
            try:
                processes.append(self.parse_process())
            except _Abort:
                if self.pos == start:
                    self.advance()
                self.recover_top()
            self.skip_newlines()
        return processes

    def recover_top(self) -> None:
        depth = 0
        while self.tok.kind != "eof":
            if depth == 0 and self.at_keyword("process"):
                return
            if self.tok.kind == "{":
                depth += 1
            elif self.tok.kind == "}":
                depth -= 1
                if depth <= 0:
                    self.advance()
                    return
            self.advance()

    def parse_name(self) -> tuple[str, Token]:
        self.skip_errors()
        if self.tok.kind in ("ident", "string"):
            tok = self.advance()
            return tok.value, tok
        raise self.fail(("name",))

    def parse_value(self, label: str) -> str:
        self.skip_errors()
        if self.tok.kind in ("ident", "string"):
            return self.advance().value
        raise self.fail((label,))

    def parse_options(self, ident: IdentDecl, allowed: tuple[str, ...]) -> None:
        while self.tok.kind == "ident" and self.peek().kind == "=":
            key_tok = self.tok
            if key_tok.value not in allowed:
                raise self.fail(tuple(f"'{k}='" for k in allowed), "unknown option")
            self.advance()
            self.advance()
            value = self.parse_value("option value")
            key = key_tok.value
            if key == "id":
                if not value:
                    raise self.fail(("non-empty id",), tok=key_tok)
                ident.explicit_id = value
            elif key == "long":
                ident.long_name = value
            elif key == "version":
                ident.version = value
            elif key == "revision":
                ident.revision = value
            elif key == "ref":
                ident.references.append(value)
            elif key == "boundary":
                ident.boundary = value

    def parse_ident(self, allowed: tuple[str, ...] = ("id", "long", "version", "revision", "ref")) -> IdentDecl:
        name, tok = self.parse_name()
        ident = IdentDecl(name, token=tok)
        self.parse_options(ident, allowed)
        return ident

    def parse_process(self) -> ProcessDecl:
        self.skip_errors()
        if not self.at_keyword("process"):
            raise self.fail(("'process'",))
        self.advance()
        proc = ProcessDecl(self.parse_ident(("id", "long", "version", "revision", "ref",
                                             "boundary")))
        self.expect("{", "'{'")
        self.skip_newlines()
        while self.tok.kind not in ("}", "eof"):
            start = self.pos
            try:
                self.parse_statement(proc)
            except _Abort:
                if self.pos == start and self.tok.kind != "}":
                    self.advance()
                self.recover()
            self.skip_newlines()
        self.expect("}", "'}'")
        return proc

    def parse_statement(self, proc: ProcessDecl) -> None:
        tok = self.tok
        word = tok.value if tok.kind == "ident" else None
        if word in STATE_KEYWORDS:
            self.advance()
            decl = Decl(word, self.parse_ident())
            if not self.at_keyword(*DIRECTIONS):
                raise self.fail(tuple(f"'{d}'" for d in DIRECTIONS))
            decl.direction = self.advance().value
            if self.at_keyword("refines"):
                self.advance()
                decl.refines = self.parse_ref()
            decl.chars = self.parse_char_block()
            proc.decls.append(decl)
        elif word == "operator":
            self.advance()
            decl = Decl(word, self.parse_ident())
            if self.at_keyword("decompose"):
                self.advance()
                decl.decompose = self.parse_ref()
            decl.chars = self.parse_char_block()
            proc.decls.append(decl)
        elif word == "resource":
            self.advance()
            decl = Decl(word, self.parse_ident())
            decl.chars = self.parse_char_block()
            proc.decls.append(decl)
        elif word in CONNECTOR_KEYWORDS:
            self.advance()
            proc.decls.append(Decl(word, self.parse_ident()))
        elif word in ("flow", "usage"):
            self.advance()
            source = self.parse_ref()
            self.expect("arrow" if word == "flow" else "dashdash",
                        "'->'" if word == "flow" else "'--'")
            target = self.parse_ref()
            explicit = None
            if self.at_keyword("id") and self.peek().kind == "=":
                self.advance()
                self.advance()
                explicit = self.parse_value("id")
                if not explicit:
                    raise self.fail(("non-empty id",))
            proc.edges.append(EdgeDecl(word, source, target, explicit, tok))
        else:
            raise self.fail(
                ("'product'", "'energy'", "'information'", "'operator'", "'resource'",
                 "'fork'", "'join'", "'decision'", "'merge'", "'flow'", "'usage'", "'}'")
            )
        self.expect_end()

    def parse_ref(self) -> Ref:
        self.skip_errors()
        if self.tok.kind in ("ident", "string"):
            tok = self.advance()
            return Ref(tok.value, tok)
        raise self.fail(("element name or id",))

    def parse_char_block(self) -> list[CharDecl]:
        if self.tok.kind != "{":
            return []
        self.advance()
        chars = []
        self.skip_newlines()
        while self.tok.kind not in ("}", "eof"):
            start = self.pos
            try:
                chars.append(self.parse_char())
                self.expect_end()
            except _Abort:
                if self.pos == start and self.tok.kind != "}":
                    self.advance()
                self.recover()
            self.skip_newlines()
        self.expect("}", "'}'")
        return chars

    def parse_char(self) -> CharDecl:
        self.skip_errors()
        if not self.at_keyword("char"):
            raise self.fail(("'char'", "'}'"))
        self.advance()
        name, tok = self.parse_name()
        self.expect("=", "'='")
        value = self.parse_value("characteristic value")
        unit = ""
        if self.at_keyword("unit") and self.peek().kind in ("ident", "string"):
            self.advance()
            unit = self.parse_value("unit")
        ident = IdentDecl(name, token=tok)
        self.parse_options(ident, ("id", "long", "version", "revision", "ref"))
        return CharDecl(ident, value, unit, self.parse_char_block())


# -- semantic pass ----------------------------------------------------------

ID_PREFIX = {
    "process": "process", "boundary": "boundary", "state": "state",
    "operator": "operator", "resource": "resource", "connector": "connector",
    "flow": "flow", "usage": "usage", "char": "char",
}


def _kind_of(keyword: str) -> str:
    if keyword in STATE_KEYWORDS:
        return "state"
    if keyword in CONNECTOR_KEYWORDS:
        return "connector"
    return keyword


class _IdAllocator:
    """Assigns ``<prefix><ordinal>`` ids, avoiding explicit ones."""

    def __init__(self, explicit: set[str]):
        self.used = set(explicit)
        self.counters: dict[str, int] = {}

    def ordinal(self, kind: str) -> int:
        self.counters[kind] = self.counters.get(kind, 0) + 1
        return self.counters[kind]

    def assign(self, kind: str, explicit: Optional[str]) -> str:
        n = self.ordinal(kind)
        if explicit is not None:
            return explicit
        candidate = f"{ID_PREFIX[kind]}{n}"
        k = 1
        while candidate in self.used:
            candidate = f"{ID_PREFIX[kind]}{n}_{k}"
            k += 1
        self.used.add(candidate)
        return candidate


def _explicit_ids(procs: list[ProcessDecl]) -> set[str]:
    out: set[str] = set()

    def chars(cs: list[CharDecl]) -> None:
        for c in cs:
            if c.ident.explicit_id is not None:
                out.add(c.ident.explicit_id)
            chars(c.children)

    for p in procs:
        for x in (p.ident.explicit_id, p.ident.boundary):
            if x:
                out.add(x)
        for d in p.decls:
            if d.ident.explicit_id is not None:
                out.add(d.ident.explicit_id)
            chars(d.chars)
        for e in p.edges:
            if e.explicit_id is not None:
                out.add(e.explicit_id)
    return out


def _identification(ident: IdentDecl, uid: str) -> Identification:
    return Identification(uid, ident.name, ident.long_name, ident.version,
                          ident.revision, tuple(ident.references))


@dataclass
class Document:
    """Result of a successful parse: the model plus source spans by element id."""

    model: Model
    spans: dict[str, SourceSpan]


class _Resolver:
    def __init__(self, parser: Parser):
        self.parser = parser

    def error(self, ref: Ref, hint: str, expected: str = "declared element name or id") -> None:
        self.parser.errors.append(ParseError(
            self.parser.span(ref.token), (expected,), f"{quote(ref.text)}", hint))

    def resolve(self, ref: Ref, by_id: dict[str, object], by_name: dict[str, list[str]],
                what: str = "element") -> Optional[str]:
        if ref.text in by_id:
            return ref.text
        hits = by_name.get(ref.text, [])
        if len(hits) == 1:
            return hits[0]
        if not hits:
            self.error(ref, f"undeclared {what}")
        else:
            self.error(ref, f"ambiguous reference: {len(hits)} {what}s named {quote(ref.text)}; "
                            "use an id")
        return None


def _build(parser: Parser, procs: list[ProcessDecl]) -> Optional[Document]:
    alloc = _IdAllocator(_explicit_ids(procs))
    spans: dict[str, SourceSpan] = {}
    resolver = _Resolver(parser)

    def make_chars(cs: list[CharDecl]) -> tuple[Characteristic, ...]:
        result = []
        for c in cs:
            uid = alloc.assign("char", c.ident.explicit_id)
            if c.ident.token is not None:
                spans[uid] = parser.span(c.ident.token)
            result.append(Characteristic(_identification(c.ident, uid), c.value, c.unit,
                                         make_chars(c.children)))
        return tuple(result)

    # pass 1: ids for every declaration, in document order
    staged = []
    for p in procs:
        pid = alloc.assign("process", p.ident.explicit_id)
        n = alloc.counters["process"]
        boundary = p.ident.boundary
        if boundary is None:
            boundary = f"boundary{n}"
            k = 1
            while boundary in alloc.used:
                boundary = f"boundary{n}_{k}"
                k += 1
            alloc.used.add(boundary)
        if p.ident.token is not None:
            spans[pid] = parser.span(p.ident.token)
        elems = []
        for d in p.decls:
            uid = alloc.assign(_kind_of(d.keyword), d.ident.explicit_id)
            if d.ident.token is not None:
                spans[uid] = parser.span(d.ident.token)
            elems.append((d, uid, make_chars(d.chars)))
        edge_ids = []
        for e in p.edges:
            uid = alloc.assign(e.keyword, e.explicit_id)
            spans[uid] = parser.span(e.token)
            edge_ids.append(uid)
        staged.append((p, pid, boundary, elems, edge_ids))

    proc_by_id = {pid: p for p, pid, *_ in staged}
    proc_by_name: dict[str, list[str]] = {}
    for p, pid, *_ in staged:
        proc_by_name.setdefault(p.ident.name, []).append(pid)

    # decomposition targets, needed to resolve refines against parent states
    decomp: dict[tuple[str, str], Optional[str]] = {}
    parents: dict[str, list[str]] = {}
    for p, pid, _, elems, _ in staged:
        for d, uid, _ in elems:
            if d.decompose is not None:
                target = resolver.resolve(d.decompose, proc_by_id, proc_by_name, "process")
                decomp[(pid, uid)] = target
                if target is not None:
                    parents.setdefault(target, []).append(pid)

    state_index: dict[str, dict[str, list[str]]] = {}
    state_ids: dict[str, set[str]] = {}
    for p, pid, _, elems, _ in staged:
        by_name: dict[str, list[str]] = {}
        for d, uid, _ in elems:
            if d.keyword in STATE_KEYWORDS:
                by_name.setdefault(d.ident.name, []).append(uid)
        state_index[pid] = by_name
        state_ids[pid] = {uid for d, uid, _ in elems if d.keyword in STATE_KEYWORDS}

    processes = []
    for p, pid, boundary, elems, edge_ids in staged:
        local_ids = {uid: d for d, uid, _ in elems}
        local_names: dict[str, list[str]] = {}
        for d, uid, _ in elems:
            local_names.setdefault(d.ident.name, []).append(uid)

        parent_ids: dict[str, object] = {}
        parent_names: dict[str, list[str]] = {}
        for parent in dict.fromkeys(parents.get(pid, [])):
            for sid in state_ids[parent]:
                parent_ids[sid] = True
            for name, ids in state_index[parent].items():
                parent_names.setdefault(name, []).extend(ids)

        states, operators, resources, connectors = [], [], [], []
        for d, uid, chars in elems:
            ident = _identification(d.ident, uid)
            if d.keyword in STATE_KEYWORDS:
                refines = None
                if d.refines is not None:
                    refines = resolver.resolve(d.refines, parent_ids, parent_names,
                                               "parent-process state")
                placement = (Placement.INTERMEDIATE if d.direction == "internal"
                             else Placement.BOUNDARY)
                states.append(StateNode(ident, STATE_KEYWORDS[d.keyword], placement,
                                        chars, refines))
            elif d.keyword == "operator":
                operators.append(ProcessOperator(ident, chars, decomp.get((pid, uid))))
            elif d.keyword == "resource":
                resources.append(TechnicalResource(ident, chars))
            else:
                connectors.append(ConnectorNode(ident, CONNECTOR_KEYWORDS[d.keyword]))

        flows, usages = [], []
        for e, uid in zip(p.edges, edge_ids):
            src = resolver.resolve(e.source, local_ids, local_names)
            dst = resolver.resolve(e.target, local_ids, local_names)
            if src is None or dst is None:
                continue
            if e.keyword == "flow":
                if d_is_resource(local_ids, src) or d_is_resource(local_ids, dst):
                    bad = e.source if d_is_resource(local_ids, src) else e.target
                    resolver.error(bad, "a flow cannot connect a technical resource",
                                   "state, operator or connector")
                    continue
                if src == dst:
                    resolver.error(e.target, "a flow cannot connect an element to itself",
                                   "a different element")
                    continue
                flows.append(Flow(uid, src, dst))
            else:
                usages.append(Usage(uid, src, dst))

        processes.append(Process(
            _identification(p.ident, pid), boundary, tuple(states), tuple(operators),
            tuple(resources), tuple(connectors), tuple(flows), tuple(usages),
        ))

    if parser.errors:
        return None
    try:
        model = build_model(processes)
    except ModelError as exc:
        ident = getattr(exc, "ident", None)
        path = getattr(exc, "path", None)
        key = ident if ident is not None else (path[0] if path else None)
        span = spans.get(key) if key is not None else None
        span = span or SourceSpan(parser.filename, 1, 1, 1, 1)
        parser.errors.append(ParseError(span, ("well-formed model",), str(exc), type(exc).__name__))
        return None
    return Document(model, spans)


def d_is_resource(local_ids: dict[str, Decl], uid: str) -> bool:
    d = local_ids.get(uid)
    return d is not None and d.keyword == "resource"


def parse_document(text: str, filename: str = "<input>") -> Document:
    """Parse source text; raise :class:`ParseFailure` listing every error."""
    parser = Parser(text, filename)
    procs = parser.parse_document()
    doc = None
    if not parser.errors:
        doc = _build(parser, procs)
    if doc is None:
        parser.errors.sort(key=lambda e: (e.span.start_line, e.span.start_col))
        raise ParseFailure(parser.errors)
    return doc


def parse(text: str, filename: str = "<input>") -> Model:
    return parse_document(text, filename).model


# -- printing ---------------------------------------------------------------

class _Printer:
    def __init__(self, model: Model):
        self.model = model
        self.counters: dict[str, int] = {}
        self.lines: list[str] = []

    def auto_id(self, kind: str, uid: str) -> bool:
        """Advance the ordinal for ``kind``; True when ``uid`` would be regenerated."""
        self.counters[kind] = self.counters.get(kind, 0) + 1
        return uid == f"{ID_PREFIX[kind]}{self.counters[kind]}"

    def ident_parts(self, ident: Identification, kind: str) -> tuple[str, list[str]]:
        opts = []
        if not self.auto_id(kind, ident.unique_ident):
            opts.append(f"id={name_token(ident.unique_ident)}")
        if ident.long_name:
            opts.append(f"long={quote(ident.long_name)}")
        if ident.version_number:
            opts.append(f"version={quote(ident.version_number)}")
        if ident.revision_number:
            opts.append(f"revision={quote(ident.revision_number)}")
        opts.extend(f"ref={name_token(r)}" for r in ident.references)
        return name_token(ident.short_name), opts

    def ident_opts(self, ident: Identification, kind: str) -> str:
        name, opts = self.ident_parts(ident, kind)
        return " ".join([name, *opts])

    def chars(self, chars: tuple[Characteristic, ...], depth: int) -> str:
        if not chars:
            return ""
        pad = "    " * depth
        out = [" {"]
        for c in chars:
            name, opts = self.ident_parts(c.identification, "char")
            line = f"{pad}    char {name} = {quote(c.value)}"
            if c.unit:
                line += f" unit {quote(c.unit)}"
            for opt in opts:
                line += " " + opt
            line += self.chars(c.children, depth + 1)
            out.append("\n" + line)
        out.append(f"\n{pad}}}")
        return "".join(out)

    @staticmethod
    def ref(text_id: str, target_name: str, ids: set[str], names: dict[str, int]) -> str:
        if target_name not in ids and names.get(target_name, 0) == 1:
            return name_token(target_name)
        return name_token(text_id)

    def run(self) -> str:
        model = self.model
        blocks = []
        for p in model.processes:
            head = ["process", self.ident_opts(p.identification, "process")]
            n = self.counters["process"]
            if p.system_boundary_id != f"boundary{n}":
                head.append(f"boundary={name_token(p.system_boundary_id)}")
            lines = [" ".join(head) + " {"]

            local_ids = set(p.node_index)
            local_names: dict[str, int] = {}
            for node in p.nodes():
                local_names[node.name] = local_names.get(node.name, 0) + 1
            parent_ids: set[str] = set()
            parent_names: dict[str, int] = {}
            for pp in dict.fromkeys(pp for pp, _ in model.parents.get(p.id, ())):
                for s in pp.states:
                    parent_ids.add(s.id)
                    parent_names[s.name] = parent_names.get(s.name, 0) + 1
            proc_ids = set(model.process_index)
            proc_names: dict[str, int] = {}
            for q in model.processes:
                proc_names[q.name] = proc_names.get(q.name, 0) + 1

            def local_ref(uid: str) -> str:
                return self.ref(uid, p.node_index[uid].name, local_ids - {uid}, local_names)

            for s in p.states:
                text = f"{s.kind.value.lower()} {self.ident_opts(s.identification, 'state')}"
                if s.placement is Placement.INTERMEDIATE:
                    text += " internal"
                elif p.incoming[s.id] and not p.outgoing[s.id]:
                    text += " out"
                else:
                    text += " in"
                if s.refines is not None:
                    target = next(x for pp, _ in model.parents[p.id] for x in pp.states
                                  if x.id == s.refines)
                    text += " refines " + self.ref(s.refines, target.name,
                                                   parent_ids - {s.refines}, parent_names)
                lines.append("    " + text + self.chars(s.characteristics, 1))
            for op in p.operators:
                text = f"operator {self.ident_opts(op.identification, 'operator')}"
                if op.decomposition is not None:
                    sub = model.process(op.decomposition)
                    text += " decompose " + self.ref(sub.id, sub.name,
                                                     proc_ids - {sub.id}, proc_names)
                lines.append("    " + text + self.chars(op.characteristics, 1))
            for r in p.resources:
                text = f"resource {self.ident_opts(r.identification, 'resource')}"
                lines.append("    " + text + self.chars(r.characteristics, 1))
            for c in p.connectors:
                lines.append(f"    {c.kind.value.lower()} "
                             f"{self.ident_opts(c.identification, 'connector')}")
            for f in p.flows:
                text = f"    flow {local_ref(f.source)} -> {local_ref(f.target)}"
                if not self.auto_id("flow", f.id):
                    text += f" id={name_token(f.id)}"
                lines.append(text)
            for u in p.usages:
                text = f"    usage {local_ref(u.operator)} -- {local_ref(u.resource)}"
                if not self.auto_id("usage", u.id):
                    text += f" id={name_token(u.id)}"
                lines.append(text)
            lines.append("}")
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"


def print_model(model: Model) -> str:
    """Canonical FPDScript text for ``model``; a fixpoint of parse then print."""
    return _Printer(model).run()


def format_source(text: str, filename: str = "<input>") -> str:
    return print_model(parse(text, filename))
