"""Feature diagrams: parsing, validation, and exact variant counting.

A diagram is a tree of features.  Children hang off a feature through
groups: and-groups whose members are individually mandatory or optional,
alternative groups (exactly one member when the parent is selected) and
or-groups (at least one member).  Requires/excludes constraints may link
any two features across the tree.

Counting is exact over arbitrary-precision integers.  Constraint-free
diagrams are counted compositionally; constraints are handled by summing
the compositional count over every consistent assignment of the
constraint-touched features, with per-subtree memoisation so untouched
subtrees are counted once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping


class ModelError(Exception):
    """A diagram violates the structural rules."""


class ParseError(ModelError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class FeatureKind(Enum):
    MANDATORY = "mandatory"
    OPTIONAL = "optional"


class GroupKind(Enum):
    AND = "and"
    OR = "or"
    ALTERNATIVE = "alternative"


class ConstraintKind(Enum):
    REQUIRES = "requires"
    EXCLUDES = "excludes"


@dataclass
class Group:
    kind: GroupKind
    members: tuple["Feature", ...]


@dataclass
class Feature:
    name: str
    # None for the root and for or/alternative members, whose selection is
    # governed by the group they sit in.
    kind: FeatureKind | None = None
    groups: tuple[Group, ...] = ()
    annotations: dict[str, str] = field(default_factory=dict)

    @property
    def children(self) -> tuple["Feature", ...]:
        return tuple(m for g in self.groups for m in g.members)


@dataclass
class CrossTreeConstraint:
    kind: ConstraintKind
    source: str
    target: str


@dataclass
class ModelDiagnostic:
    severity: str
    message: str
    feature: str | None = None

    def render(self) -> str:
        where = f" ({self.feature})" if self.feature else ""
        return f"{self.severity}: {self.message}{where}"


@dataclass
class Obligation:
    """Something that keeps an assignment from being a valid configuration."""

    kind: str
    subject: str
    members: tuple[str, ...] = ()

    def render(self) -> str:
        if self.members:
            return f"{self.kind}: {self.subject} {{{', '.join(self.members)}}}"
        return f"{self.kind}: {self.subject}"


class FeatureDiagram:
    """Immutable feature tree plus cross-tree constraints.

    Lookup tables (by-name index, parents, document order) are built once
    at construction; all operations on a diagram are pure.
    """

    def __init__(self, root: Feature, constraints: tuple[CrossTreeConstraint, ...] = (), name: str | None = None):
        self.root = root
        self.constraints = tuple(constraints)
        self.name = name if name is not None else root.name
        self._features: dict[str, Feature] = {}
        self._parents: dict[str, str] = {}
        self._order: list[str] = []
        seen_ids: set[int] = set()
        stack: list[Feature] = [root]
        while stack:
            f = stack.pop()
            if id(f) in seen_ids:
                raise ModelError(f"feature {f.name!r} appears twice in the tree")
            seen_ids.add(id(f))
            if f.name in self._features:
                raise ModelError(f"duplicate feature name {f.name!r}")
            self._features[f.name] = f
            self._order.append(f.name)
            for child in reversed(f.children):
                self._parents[child.name] = f.name
                stack.append(child)

    def feature(self, name: str) -> Feature:
        try:
            return self._features[name]
        except KeyError:
            raise ModelError(f"unknown feature {name!r}") from None

    def has_feature(self, name: str) -> bool:
        return name in self._features

    def parent_of(self, name: str) -> str | None:
        return self._parents.get(name)

    def feature_names(self) -> tuple[str, ...]:
        """All feature names in document order, root first."""
        return tuple(self._order)

    def features(self) -> Iterator[Feature]:
        for name in self._order:
            yield self._features[name]

    def subtree_names(self, name: str) -> tuple[str, ...]:
        out: list[str] = []
        stack = [self.feature(name)]
        while stack:
            f = stack.pop()
            out.append(f.name)
            stack.extend(reversed(f.children))
        return tuple(out)

    def group_of(self, name: str) -> tuple[Feature, Group] | None:
        """The (parent, group) a non-root feature is a member of."""
        parent_name = self._parents.get(name)
        if parent_name is None:
            return None
        parent = self._features[parent_name]
        for g in parent.groups:
            if any(m.name == name for m in g.members):
                return parent, g
        return None


NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")

_KEYWORDS = frozenset({"feature", "mandatory", "optional", "alternative", "or", "requires", "excludes"})


@dataclass
class _Token:
    kind: str  # word, lbrace, rbrace, arrow, at, string
    value: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch == "{":
            tokens.append(_Token("lbrace", "{", line, start_col))
            i += 1
            col += 1
            continue
        if ch == "}":
            tokens.append(_Token("rbrace", "}", line, start_col))
            i += 1
            col += 1
            continue
        if text.startswith("->", i):
            tokens.append(_Token("arrow", "->", line, start_col))
            i += 2
            col += 2
            continue
        if ch == "@":
            m = NAME_RE.match(text, i + 1)
            if not m:
                raise ParseError("annotation key expected after '@'", line, start_col)
            tokens.append(_Token("at", m.group(0), line, start_col))
            col += m.end() - i
            i = m.end()
            continue
        if ch == '"':
            j = i + 1
            buf: list[str] = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n and text[j + 1] in '"\\':
                    buf.append(text[j + 1])
                    j += 2
                elif text[j] == "\n":
                    raise ParseError("unterminated string", line, start_col)
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string", line, start_col)
            tokens.append(_Token("string", "".join(buf), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        m = NAME_RE.match(text, i)
        if m:
            tokens.append(_Token("word", m.group(0), line, start_col))
            col += m.end() - i
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", line, start_col)
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0
        self.declared: dict[str, _Token] = {}

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("word", "", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.column)
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {what}, got {tok.value!r}", tok.line, tok.column)
        return tok

    def expect_word(self, word: str) -> _Token:
        tok = self.next()
        if tok.kind != "word" or tok.value != word:
            raise ParseError(f"expected {word!r}, got {tok.value!r}", tok.line, tok.column)
        return tok

    def feature_name(self) -> _Token:
        tok = self.expect("word", "feature name")
        if tok.value in _KEYWORDS:
            raise ParseError(f"{tok.value!r} is a reserved word", tok.line, tok.column)
        if tok.value in self.declared:
            raise ParseError(f"duplicate feature name {tok.value!r}", tok.line, tok.column)
        self.declared[tok.value] = tok
        return tok

    def parse_model(self) -> FeatureDiagram:
        self.expect_word("feature")
        root_tok = self.feature_name()
        annotations, groups = self.parse_block()
        root = Feature(root_tok.value, None, groups, annotations)
        constraints = self.parse_constraints()
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected {tok.value!r} after model", tok.line, tok.column)
        diagram = FeatureDiagram(root, constraints)
        for c in constraints:
            for endpoint in (c.source, c.target):
                if endpoint not in self.declared:
                    raise ParseError(f"constraint references unknown feature {endpoint!r}", 1, 1)
        return diagram

    def parse_block(self) -> tuple[dict[str, str], tuple[Group, ...]]:
        self.expect("lbrace", "'{'")
        annotations: dict[str, str] = {}
        groups: list[Group] = []
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError("unclosed block", self.tokens[-1].line, self.tokens[-1].column)
            if tok.kind == "rbrace":
                self.next()
                return annotations, tuple(groups)
            if tok.kind == "at":
                self.next()
                text = self.expect("string", "annotation text")
                if tok.value in annotations:
                    raise ParseError(f"duplicate annotation key {tok.value!r}", tok.line, tok.column)
                annotations[tok.value] = text.value
                continue
            if tok.kind == "word" and tok.value in ("mandatory", "optional"):
                self.next()
                name = self.feature_name()
                child_annotations, child_groups = self.parse_optional_block()
                kind = FeatureKind.MANDATORY if tok.value == "mandatory" else FeatureKind.OPTIONAL
                member = Feature(name.value, kind, child_groups, child_annotations)
                groups.append(Group(GroupKind.AND, (member,)))
                continue
            if tok.kind == "word" and tok.value in ("alternative", "or"):
                self.next()
                kind = GroupKind.ALTERNATIVE if tok.value == "alternative" else GroupKind.OR
                groups.append(self.parse_group(kind, tok))
                continue
            raise ParseError(f"unexpected {tok.value!r} in block", tok.line, tok.column)

    def parse_optional_block(self) -> tuple[dict[str, str], tuple[Group, ...]]:
        tok = self.peek()
        if tok is not None and tok.kind == "lbrace":
            return self.parse_block()
        return {}, ()

    def parse_group(self, kind: GroupKind, opener: _Token) -> Group:
        self.expect("lbrace", "'{'")
        members: list[Feature] = []
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError("unclosed group", opener.line, opener.column)
            if tok.kind == "rbrace":
                self.next()
                break
            if tok.kind == "word" and tok.value in ("mandatory", "optional"):
                raise ParseError(
                    f"{tok.value!r} not allowed inside {kind.value} groups", tok.line, tok.column
                )
            name = self.feature_name()
            annotations, groups = self.parse_optional_block()
            members.append(Feature(name.value, None, groups, annotations))
        if len(members) < 2:
            raise ParseError(f"{kind.value} group needs at least two members", opener.line, opener.column)
        return Group(kind, tuple(members))

    def parse_constraints(self) -> tuple[CrossTreeConstraint, ...]:
        constraints: list[CrossTreeConstraint] = []
        while True:
            tok = self.peek()
            if tok is None:
                return tuple(constraints)
            if tok.kind == "word" and tok.value == "requires":
                self.next()
                src = self.expect("word", "feature name")
                self.expect("arrow", "'->'")
                dst = self.expect("word", "feature name")
                if src.value == dst.value:
                    raise ParseError("constraint endpoints must differ", src.line, src.column)
                constraints.append(CrossTreeConstraint(ConstraintKind.REQUIRES, src.value, dst.value))
                continue
            if tok.kind == "word" and tok.value == "excludes":
                self.next()
                a = self.expect("word", "feature name")
                b = self.expect("word", "feature name")
                if a.value == b.value:
                    raise ParseError("constraint endpoints must differ", a.line, a.column)
                constraints.append(CrossTreeConstraint(ConstraintKind.EXCLUDES, a.value, b.value))
                continue
            return tuple(constraints)


def parse_model(text: str) -> FeatureDiagram:
    """Parse model source into a diagram, or raise ParseError."""
    return _Parser(_tokenize(text)).parse_model()


def serialize_model(d: FeatureDiagram) -> str:
    """Canonical model source; parse_model(serialize_model(d)) reproduces d."""
    lines: list[str] = []

    def annotations(f: Feature, indent: str) -> None:
        for key, value in f.annotations.items():
            escaped = value.replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'{indent}@{key} "{escaped}"')

    def body(f: Feature, indent: str) -> None:
        annotations(f, indent)
        for g in f.groups:
            if g.kind is GroupKind.AND:
                m = g.members[0]
                kw = "mandatory" if m.kind is FeatureKind.MANDATORY else "optional"
                emit_feature(f"{indent}{kw} {m.name}", m, indent)
            else:
                lines.append(f"{indent}{g.kind.value} {{")
                for m in g.members:
                    emit_feature(f"{indent}  {m.name}", m, indent + "  ")
                lines.append(f"{indent}}}")

    def emit_feature(head: str, f: Feature, indent: str, force_block: bool = False) -> None:
        if f.groups or f.annotations or force_block:
            lines.append(head + " {")
            body(f, indent + "  ")
            lines.append(indent + "}")
        else:
            lines.append(head)

    emit_feature(f"feature {d.root.name}", d.root, "", force_block=True)
    for c in d.constraints:
        if c.kind is ConstraintKind.REQUIRES:
            lines.append(f"requires {c.source} -> {c.target}")
        else:
            lines.append(f"excludes {c.source} {c.target}")
    return "\n".join(lines) + "\n"


def _structural_diagnostics(d: FeatureDiagram) -> list[ModelDiagnostic]:
    out: list[ModelDiagnostic] = []
    if d.root.kind is not None:
        out.append(ModelDiagnostic("error", "root feature must not carry mandatory/optional", d.root.name))
    for f in d.features():
        for g in f.groups:
            if g.kind in (GroupKind.OR, GroupKind.ALTERNATIVE):
                if len(g.members) < 2:
                    out.append(
                        ModelDiagnostic("error", f"{g.kind.value} group needs at least two members", f.name)
                    )
                for m in g.members:
                    if m.kind is not None:
                        out.append(
                            ModelDiagnostic(
                                "error", f"{g.kind.value} group member must not carry its own kind", m.name
                            )
                        )
            else:
                for m in g.members:
                    if m.kind is None:
                        out.append(ModelDiagnostic("error", "and-group member needs mandatory/optional", m.name))
    for c in d.constraints:
        for endpoint in (c.source, c.target):
            if not d.has_feature(endpoint):
                out.append(ModelDiagnostic("error", f"constraint references unknown feature {endpoint!r}", endpoint))
        if c.source == c.target:
            out.append(ModelDiagnostic("error", "constraint endpoints must differ", c.source))
    return out


def _check_well_formed(d: FeatureDiagram) -> None:
    problems = _structural_diagnostics(d)
    if problems:
        raise ModelError("; ".join(p.render() for p in problems))


def count_configurations(d: FeatureDiagram, forced: Mapping[str, bool] | None = None) -> int:
    """Exact number of valid complete configurations consistent with `forced`.

    `forced` pins features to selected (True) or deselected (False); all
    other features range freely.  Used for dead-feature detection and for
    checking that a partial configuration still has completions.
    """
    _check_well_formed(d)
    pinned: dict[str, bool] = dict(forced or {})
    for name in pinned:
        if not d.has_feature(name):
            raise ModelError(f"unknown feature {name!r}")

    free_endpoints: list[str] = []
    for c in d.constraints:
        for endpoint in (c.source, c.target):
            if endpoint not in pinned and endpoint not in free_endpoints:
                free_endpoints.append(endpoint)

    # Per-subtree keys: which decided features a subtree's count depends on.
    decided = list(pinned) + free_endpoints
    relevant: dict[str, tuple[str, ...]] = {}

    def collect(f: Feature) -> tuple[str, ...]:
        names = [f.name] if f.name in pinned or f.name in free_endpoints else []
        for child in f.children:
            names.extend(collect(child))
        relevant[f.name] = tuple(names)
        return relevant[f.name]

    collect(d.root)
    del decided

    memo: dict[tuple[str, tuple[bool, ...]], int] = {}

    def count_selected(f: Feature, sigma: dict[str, bool]) -> int:
        if sigma.get(f.name) is False:
            return 0
        key = (f.name, tuple(sigma[n] for n in relevant[f.name]))
        hit = memo.get(key)
        if hit is not None:
            return hit
        total = 1
        for g in f.groups:
            if g.kind is GroupKind.AND:
                for m in g.members:
                    if m.kind is FeatureKind.MANDATORY:
                        total *= count_selected(m, sigma)
                    else:
                        total *= count_selected(m, sigma) + off(m, sigma)
            elif g.kind is GroupKind.ALTERNATIVE:
                total *= sum(
                    count_selected(m, sigma) * _product(off(n, sigma) for n in g.members if n is not m)
                    for m in g.members
                )
            else:
                with_any = _product(count_selected(m, sigma) + off(m, sigma) for m in g.members)
                all_off = _product(off(m, sigma) for m in g.members)
                total *= with_any - all_off
            if total == 0:
                break
        memo[key] = total
        return total

    def off(f: Feature, sigma: dict[str, bool]) -> int:
        # 1 if the whole subtree may be deselected, else 0.
        return 0 if any(sigma[n] for n in relevant[f.name]) else 1

    total = 0
    for bits in range(1 << len(free_endpoints)):
        sigma = dict(pinned)
        for i, name in enumerate(free_endpoints):
            sigma[name] = bool(bits >> i & 1)
        if any(_constraint_violated(c, sigma) for c in d.constraints):
            continue
        if sigma.get(d.root.name) is False:
            continue
        total += count_selected(d.root, sigma)
    return total


def _constraint_violated(c: CrossTreeConstraint, sigma: Mapping[str, bool]) -> bool:
    if c.kind is ConstraintKind.REQUIRES:
        return sigma[c.source] and not sigma[c.target]
    return sigma[c.source] and sigma[c.target]


def _product(values: Iterator[int] | list[int]) -> int:
    total = 1
    for v in values:
        total *= v
    return total


def count_variants(d: FeatureDiagram) -> int:
    """Exact number of complete valid configurations of the diagram."""
    return count_configurations(d)


def validate_model(d: FeatureDiagram) -> list[ModelDiagnostic]:
    """Structural diagnostics plus dead-feature analysis.

    Empty result means the diagram is well formed and every feature occurs
    in at least one valid configuration.
    """
    out = _structural_diagnostics(d)
    if out:
        return out
    for name in d.feature_names():
        if count_configurations(d, {name: True}) == 0:
            out.append(ModelDiagnostic("warning", f"dead feature {name}", name))
    return out
