"""Line-oriented textual DSL for shape grammars (.sg files).

Grammar (EBNF, one statement per line, ``#`` comments):

    file        ::= statement*
    statement   ::= product | shapetype | axiom | unit | rule | constraint
    product     ::= "product" IDENT
    shapetype   ::= "shapetype" STRING
    axiom       ::= "axiom" IDENT
    unit        ::= "unit" IDENT PRIMITIVE "{" unitline* "}"
    unitline    ::= param | port | center
    param       ::= "param" IDENT IDENT NUMBER NUMBER ["int"]
    port        ::= "port" IDENT vec3 [vec3]
    center      ::= "center" vec3
    rule        ::= "rule" IDENT "{" ruleline* "}"
    ruleline    ::= "adds" IDENT | "host" IDENT "." IDENT | param
                  | "symmetry" INT
    constraint  ::= "constraint" IDENT body ["when" STRING]
    body        ::= "count-range" IDENT INT INT
                  | "requires" IDENT IDENT
                  | "excludes" IDENT IDENT
                  | "param-relation" IDENT ":" linexpr OP NUMBER
                  | "no-collision"
    linexpr     ::= term ("+" term)*
    term        ::= NUMBER "*" IDENT
    vec3        ::= "(" NUMBER NUMBER NUMBER ")"
    OP          ::= ">=" | "<="
    PRIMITIVE   ::= "box" | "cylinder" | "sphere" | "extrusion-profile"
    STRING      ::= '"' chars '"'     (supports \\" and \\\\ escapes)

``serialize_grammar`` emits a canonical form that reparses to an equal
``Grammar``; floats are rendered with ``repr`` so values survive exactly.
"""

from __future__ import annotations

import re
from typing import Optional

from .model import (
    PRIMITIVE_ARITY,
    PRIMITIVES,
    Constraint,
    CountRange,
    Excludes,
    Grammar,
    GrammarError,
    NoCollision,
    ParamRelation,
    ParamSpec,
    Port,
    Requires,
    Rule,
    ShapeUnit,
)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*$")

_TOKEN = re.compile(
    r"""
    \s*(
        "(?:[^"\\]|\\.)*"       # string
      | [A-Za-z_][A-Za-z0-9_\-]*  # identifier / keyword
      | -?\d+\.\d+(?:[eE][+-]?\d+)?  # float
      | -?\d+(?:[eE][+-]?\d+)?       # int
      | >=|<=|[(){}:.*+]
    )""",
    re.VERBOSE,
)


def _tokenize_line(text: str, lineno: int) -> list[str]:
    # strip comments outside strings
    out: list[str] = []
    pos = 0
    stripped = text
    # remove trailing comment (naive but strings never contain '#' in practice;
    # honor '#' inside quotes)
    in_str = False
    for i, ch in enumerate(text):
        if ch == '"' and (i == 0 or text[i - 1] != "\\"):
            in_str = not in_str
        elif ch == "#" and not in_str:
            stripped = text[:i]
            break
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if m is None:
            rest = stripped[pos:].strip()
            if not rest:
                break
            raise GrammarError(f"unexpected character {rest[0]!r}", lineno, pos + 1)
        out.append(m.group(1))
        pos = m.end()
    return out


class _Cursor:
    """Token cursor over one logical line, with positional error messages."""

    def __init__(self, tokens: list[str], lineno: int):
        self.tokens = tokens
        self.lineno = lineno
        self.i = 0

    def done(self) -> bool:
        return self.i >= len(self.tokens)

    def peek(self) -> Optional[str]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self, expected: str) -> str:
        if self.done():
            raise GrammarError(f"expected {expected}, got end of line", self.lineno)
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, literal: str) -> None:
        tok = self.next(repr(literal))
        if tok != literal:
            raise GrammarError(f"expected {literal!r}, got {tok!r}", self.lineno, self.i)

    def ident(self, what: str = "identifier") -> str:
        tok = self.next(what)
        if not _IDENT.match(tok):
            raise GrammarError(f"expected {what}, got {tok!r}", self.lineno, self.i)
        return tok

    def number(self, what: str = "number") -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise GrammarError(f"expected {what}, got {tok!r}", self.lineno, self.i) from None

    def integer(self, what: str = "integer") -> int:
        v = self.number(what)
        if v != round(v):
            raise GrammarError(f"expected {what}, got non-integer {v}", self.lineno, self.i)
        return int(round(v))

    def string(self, what: str = "string") -> str:
        tok = self.next(what)
        if not (tok.startswith('"') and tok.endswith('"')):
            raise GrammarError(f"expected quoted {what}, got {tok!r}", self.lineno, self.i)
        return tok[1:-1].replace('\\"', '"').replace("\\\\", "\\")

    def vec3(self) -> tuple[float, float, float]:
        self.expect("(")
        x = self.number()
        y = self.number()
        z = self.number()
        self.expect(")")
        return (x, y, z)

    def end(self) -> None:
        if not self.done():
            raise GrammarError(
                f"unexpected trailing token {self.peek()!r}", self.lineno, self.i + 1
            )


def _parse_param(cur: _Cursor, owner: str, seen: set[str]) -> ParamSpec:
    name = cur.ident("parameter name")
    if name in seen:
        raise GrammarError(f"duplicate parameter {name!r} in {owner}", cur.lineno)
    seen.add(name)
    unit = cur.ident("unit label")
    lo = cur.number("min")
    hi = cur.number("max")
    kind = "continuous"
    if cur.peek() == "int":
        cur.next("int")
        kind = "integer"
    cur.end()
    if lo > hi:
        raise GrammarError(f"bad range for param {name!r}: min {lo} > max {hi}", cur.lineno)
    if kind == "integer" and (lo != round(lo) or hi != round(hi)):
        raise GrammarError(f"integer param {name!r} has non-integral bounds", cur.lineno)
    return ParamSpec(name=name, unit=unit, min=lo, max=hi, kind=kind)


def parse_grammar(text: str) -> Grammar:
    """Parse DSL source into a Grammar.

    Raises GrammarError with a line number for syntax errors and for semantic
    errors that make the grammar unusable (dangling references, bad ranges,
    duplicate names). Issues that merely make a grammar invalid-but-representable
    are left to ``validate_grammar``.
    """
    product: Optional[str] = None
    shape_types: list[str] = []
    units: list[ShapeUnit] = []
    rules: list[Rule] = []
    constraints: list[Constraint] = []
    axiom: Optional[str] = None

    lines = text.split("\n")
    i = 0
    n = len(lines)

    def block_lines(start: int) -> tuple[list[tuple[int, list[str]]], int]:
        """Collect tokenized lines until the closing '}' of a block."""
        body: list[tuple[int, list[str]]] = []
        j = start
        while j < n:
            toks = _tokenize_line(lines[j], j + 1)
            if toks == ["}"]:
                return body, j + 1
            if toks:
                body.append((j + 1, toks))
            j += 1
        raise GrammarError("unterminated block (missing '}')", start)

    while i < n:
        lineno = i + 1
        toks = _tokenize_line(lines[i], lineno)
        i += 1
        if not toks:
            continue
        cur = _Cursor(toks, lineno)
        head = cur.next("statement keyword")

        if head == "product":
            if product is not None:
                raise GrammarError("duplicate product declaration", lineno)
            product = cur.ident("product name")
            cur.end()

        elif head == "shapetype":
            label = cur.string("shape type label")
            cur.end()
            if label in shape_types:
                raise GrammarError(f"duplicate shapetype {label!r}", lineno)
            shape_types.append(label)

        elif head == "axiom":
            if axiom is not None:
                raise GrammarError("duplicate axiom declaration", lineno)
            axiom = cur.ident("axiom unit name")
            cur.end()

        elif head == "unit":
            name = cur.ident("unit name")
            prim = cur.next("primitive")
            if prim not in PRIMITIVES:
                raise GrammarError(
                    f"unknown primitive {prim!r} (expected one of {', '.join(PRIMITIVES)})",
                    lineno,
                )
            cur.expect("{")
            cur.end()
            if any(u.name == name for u in units):
                raise GrammarError(f"duplicate unit {name!r}", lineno)
            body, i = block_lines(i)
            params: list[ParamSpec] = []
            ports: list[Port] = []
            center = (0.0, 0.0, 0.0)
            seen_params: set[str] = set()
            for bl, btoks in body:
                bc = _Cursor(btoks, bl)
                kw = bc.next("unit property")
                if kw == "param":
                    params.append(_parse_param(bc, f"unit {name!r}", seen_params))
                elif kw == "port":
                    pname = bc.ident("port name")
                    if any(p.name == pname for p in ports):
                        raise GrammarError(f"duplicate port {pname!r} in unit {name!r}", bl)
                    pos = bc.vec3()
                    orient = bc.vec3() if bc.peek() == "(" else (0.0, 0.0, 0.0)
                    bc.end()
                    ports.append(Port(name=pname, position=pos, orientation=orient))
                elif kw == "center":
                    center = bc.vec3()
                    bc.end()
                else:
                    raise GrammarError(f"unknown unit property {kw!r}", bl)
            arity = PRIMITIVE_ARITY[prim]
            if len(params) != arity:
                raise GrammarError(
                    f"unit {name!r}: primitive {prim!r} needs {arity} size params, got {len(params)}",
                    lineno,
                )
            units.append(
                ShapeUnit(
                    name=name,
                    primitive=prim,
                    size_params=tuple(params),
                    ports=tuple(ports),
                    center=center,
                )
            )

        elif head == "rule":
            rid = cur.ident("rule id")
            cur.expect("{")
            cur.end()
            if any(r.id == rid for r in rules):
                raise GrammarError(f"duplicate rule {rid!r}", lineno)
            body, i = block_lines(i)
            adds: Optional[str] = None
            host: Optional[tuple[str, str]] = None
            params = []
            symmetry = 1
            seen_params = set()
            for bl, btoks in body:
                bc = _Cursor(btoks, bl)
                kw = bc.next("rule property")
                if kw == "adds":
                    adds = bc.ident("unit name")
                    bc.end()
                elif kw == "host":
                    hunit = bc.ident("host unit")
                    bc.expect(".")
                    hport = bc.ident("host port")
                    bc.end()
                    host = (hunit, hport)
                elif kw == "param":
                    params.append(_parse_param(bc, f"rule {rid!r}", seen_params))
                elif kw == "symmetry":
                    symmetry = bc.integer("symmetry count")
                    bc.end()
                    if symmetry < 1:
                        raise GrammarError(f"rule {rid!r}: symmetry must be >= 1", bl)
                else:
                    raise GrammarError(f"unknown rule property {kw!r}", bl)
            if adds is None:
                raise GrammarError(f"rule {rid!r} missing 'adds'", lineno)
            if host is None:
                raise GrammarError(f"rule {rid!r} missing 'host'", lineno)
            rules.append(
                Rule(
                    id=rid,
                    adds_unit=adds,
                    host_unit=host[0],
                    host_port=host[1],
                    params=tuple(params),
                    symmetry=symmetry,
                )
            )

        elif head == "constraint":
            cid = cur.ident("constraint id")
            if any(c.id == cid for c in constraints):
                raise GrammarError(f"duplicate constraint {cid!r}", lineno)
            kind = cur.next("constraint kind")
            when: Optional[str] = None

            def parse_when(c: _Cursor) -> Optional[str]:
                if c.peek() == "when":
                    c.next("when")
                    return c.string("shape type")
                return None

            if kind == "count-range":
                cunit = cur.ident("unit name")
                lo = cur.integer("lo")
                hi = cur.integer("hi")
                when = parse_when(cur)
                cur.end()
                constraints.append(CountRange(id=cid, unit=cunit, lo=lo, hi=hi, when=when))
            elif kind in ("requires", "excludes"):
                a = cur.ident("rule id")
                b = cur.ident("rule id")
                when = parse_when(cur)
                cur.end()
                cls = Requires if kind == "requires" else Excludes
                constraints.append(cls(id=cid, a=a, b=b, when=when))
            elif kind == "param-relation":
                rrule = cur.ident("rule id")
                cur.expect(":")
                terms: list[tuple[float, str]] = []
                while True:
                    coef = cur.number("coefficient")
                    cur.expect("*")
                    pname = cur.ident("param name")
                    terms.append((coef, pname))
                    if cur.peek() == "+":
                        cur.next("+")
                        continue
                    break
                op = cur.next("comparator")
                if op not in (">=", "<="):
                    raise GrammarError(f"expected >= or <=, got {op!r}", lineno)
                rhs = cur.number("rhs")
                when = parse_when(cur)
                cur.end()
                constraints.append(
                    ParamRelation(id=cid, rule=rrule, terms=tuple(terms), op=op, rhs=rhs, when=when)
                )
            elif kind == "no-collision":
                when = parse_when(cur)
                cur.end()
                constraints.append(NoCollision(id=cid, when=when))
            else:
                raise GrammarError(f"unknown constraint kind {kind!r}", lineno)
        else:
            raise GrammarError(f"unknown statement {head!r}", lineno)

    if product is None:
        raise GrammarError("missing 'product' declaration")
    if not shape_types:
        raise GrammarError("at least one 'shapetype' is required")
    if axiom is None:
        raise GrammarError("missing 'axiom' declaration")

    g = Grammar(
        product_kind=product,
        shape_types=tuple(shape_types),
        units=tuple(units),
        rules=tuple(rules),
        constraints=tuple(constraints),
        axiom=axiom,
    )
    _check_references(g)
    return g


def _check_references(g: Grammar) -> None:
    """Reject dangling references; these make a grammar uninterpretable."""
    if not g.has_unit(g.axiom):
        raise GrammarError(f"axiom references undefined unit {g.axiom!r}")
    for r in g.rules:
        if not g.has_unit(r.adds_unit):
            raise GrammarError(f"rule {r.id!r} adds undefined unit {r.adds_unit!r}")
        if not g.has_unit(r.host_unit):
            raise GrammarError(f"rule {r.id!r} hosts on undefined unit {r.host_unit!r}")
        host = g.unit(r.host_unit)
        if not any(p.name == r.host_port for p in host.ports):
            raise GrammarError(
                f"rule {r.id!r} references undefined port {r.host_unit}.{r.host_port}"
            )
    for c in g.constraints:
        if isinstance(c, CountRange):
            if not g.has_unit(c.unit):
                raise GrammarError(f"constraint {c.id!r} references undefined unit {c.unit!r}")
        elif isinstance(c, (Requires, Excludes)):
            for rid in (c.a, c.b):
                if not g.has_rule(rid):
                    raise GrammarError(f"constraint {c.id!r} references undefined rule {rid!r}")
        elif isinstance(c, ParamRelation):
            if not g.has_rule(c.rule):
                raise GrammarError(f"constraint {c.id!r} references undefined rule {c.rule!r}")
            rule = g.rule(c.rule)
            names = {p.name for p in rule.params}
            for _, pname in c.terms:
                if pname not in names:
                    raise GrammarError(
                        f"constraint {c.id!r} references undefined param {pname!r} of rule {c.rule!r}"
                    )
        if c.when is not None and c.when not in g.shape_types:
            raise GrammarError(f"constraint {c.id!r} references unknown shape type {c.when!r}")


# ---------------------------------------------------------------------------
# canonical serialization


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _fnum(x: float) -> str:
    return repr(float(x))


def _vec(v: tuple[float, float, float]) -> str:
    return "(" + " ".join(_fnum(c) for c in v) + ")"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _param_line(p: ParamSpec) -> str:
    if p.kind == "integer":
        return f"param {p.name} {p.unit} {_num(p.min)} {_num(p.max)} int"
    return f"param {p.name} {p.unit} {_fnum(p.min)} {_fnum(p.max)}"


def serialize_grammar(g: Grammar) -> str:
    """Render a grammar in canonical DSL form (round-trips through parse)."""
    out: list[str] = [f"product {g.product_kind}"]
    for st in g.shape_types:
        out.append(f"shapetype {_quote(st)}")
    out.append("")
    for u in g.units:
        out.append(f"unit {u.name} {u.primitive} {{")
        for p in u.size_params:
            out.append(f"  {_param_line(p)}")
        if u.center != (0.0, 0.0, 0.0):
            out.append(f"  center {_vec(u.center)}")
        for port in u.ports:
            out.append(f"  port {port.name} {_vec(port.position)} {_vec(port.orientation)}")
        out.append("}")
        out.append("")
    out.append(f"axiom {g.axiom}")
    out.append("")
    for r in g.rules:
        out.append(f"rule {r.id} {{")
        out.append(f"  adds {r.adds_unit}")
        out.append(f"  host {r.host_unit}.{r.host_port}")
        for p in r.params:
            out.append(f"  {_param_line(p)}")
        if r.symmetry != 1:
            out.append(f"  symmetry {r.symmetry}")
        out.append("}")
        out.append("")
    for c in g.constraints:
        suffix = f" when {_quote(c.when)}" if c.when else ""
        if isinstance(c, CountRange):
            out.append(f"constraint {c.id} count-range {c.unit} {c.lo} {c.hi}{suffix}")
        elif isinstance(c, Requires):
            out.append(f"constraint {c.id} requires {c.a} {c.b}{suffix}")
        elif isinstance(c, Excludes):
            out.append(f"constraint {c.id} excludes {c.a} {c.b}{suffix}")
        elif isinstance(c, ParamRelation):
            expr = " + ".join(f"{_fnum(coef)}*{name}" for coef, name in c.terms)
            out.append(f"constraint {c.id} param-relation {c.rule}: {expr} {c.op} {_fnum(c.rhs)}{suffix}")
        elif isinstance(c, NoCollision):
            out.append(f"constraint {c.id} no-collision{suffix}")
    return "\n".join(out).rstrip("\n") + "\n"
