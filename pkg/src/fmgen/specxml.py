"""The 0/1 specification document exchanged between specifier and generator.

The document mirrors the feature tree: one ``<feature name value>``
element per feature, nested exactly like the diagram, inside a
``<specification model>`` root.  Emission is byte-stable (two-space
indentation, document order, self-closing leaves).  Preview mode marks
still-open features with ``value="?"``.
"""

from __future__ import annotations

import xml.etree.ElementTree as ElementTree

from .config import Configuration, assignment_obligations, derive_states, status
from .model import Feature, FeatureDiagram, Obligation


class SpecError(Exception):
    """Specification document malformed or inconsistent with the diagram."""


class InvalidConfigurationError(SpecError):
    def __init__(self, obligations: list[Obligation]):
        super().__init__("; ".join(ob.render() for ob in obligations))
        self.obligations = obligations


def _emit(c: Configuration, value_of) -> str:
    d = c.diagram
    lines = [f'<specification model="{d.name}">']

    def element(f: Feature, depth: int) -> None:
        indent = "  " * depth
        value = value_of(f.name)
        if f.children:
            lines.append(f'{indent}<feature name="{f.name}" value="{value}">')
            for child in f.children:
                element(child, depth + 1)
            lines.append(f"{indent}</feature>")
        else:
            lines.append(f'{indent}<feature name="{f.name}" value="{value}"/>')

    element(d.root, 1)
    lines.append("</specification>")
    return "\n".join(lines) + "\n"


def emit_spec(c: Configuration) -> str:
    """Final 0/1 document; the configuration must be complete."""
    result = status(c)
    if not result.complete:
        raise InvalidConfigurationError(list(result.obligations))
    return _emit(c, lambda name: "1" if c.derived_state[name] else "0")


def emit_spec_preview(c: Configuration) -> str:
    """Like emit_spec but accepts open configurations (undecided => "?")."""

    def value_of(name: str) -> str:
        state = c.derived_state[name]
        if state is None:
            return "?"
        return "1" if state else "0"

    return _emit(c, value_of)


def parse_spec(text: str, d: FeatureDiagram) -> Configuration:
    """Parse and validate a 0/1 document against the diagram.

    The result is a complete configuration whose user decisions carry the
    whole assignment; invalid assignments raise with named obligations.
    """
    try:
        root_element = ElementTree.fromstring(text)
    except ElementTree.ParseError as e:
        raise SpecError(f"malformed XML: {e}") from None
    if root_element.tag != "specification":
        raise SpecError(f"expected <specification> root, got <{root_element.tag}>")

    assignment: dict[str, bool] = {}
    structure: dict[str, str | None] = {}

    def visit(element: ElementTree.Element, parent: str | None) -> None:
        if element.tag != "feature":
            raise SpecError(f"unexpected element <{element.tag}>")
        name = element.get("name")
        value = element.get("value")
        if name is None or value is None:
            raise SpecError("feature element needs name and value attributes")
        if not d.has_feature(name):
            raise SpecError(f"unknown feature {name!r}")
        if name in assignment:
            raise SpecError(f"feature {name!r} appears twice")
        if value not in ("0", "1"):
            raise SpecError(f"feature {name!r}: value must be 0 or 1, got {value!r}")
        assignment[name] = value == "1"
        structure[name] = parent
        for child in element:
            visit(child, name)

    children = list(root_element)
    if len(children) != 1:
        raise SpecError("specification must contain exactly one root feature element")
    visit(children[0], None)

    for name in d.feature_names():
        if name not in assignment:
            raise SpecError(f"missing feature {name!r}")
        if structure[name] != d.parent_of(name):
            raise SpecError(f"feature {name!r} nested under {structure[name]!r}, expected {d.parent_of(name)!r}")

    obligations = assignment_obligations(d, assignment)
    if obligations:
        raise InvalidConfigurationError(obligations)
    states = derive_states(d, assignment)
    return Configuration(d, assignment, states)
