"""Transforms a feature diagram into an abstract widget tree.

The tree is toolkit-neutral: panels and group titles structure the dialog,
checkboxes stand for decidable features, radio groups for alternative
groups (exactly one) and checkbox groups for or-groups (at least one).
Widget refs are unique strings: ``feature:<name>`` for a feature's own
control, ``panel:<name>`` for the box wrapping a feature's children, and
``group:<parent>:<index>`` for group containers.

Enablement is driven by the configuration engine: a control is enabled
exactly when, with the user's own decision on that feature set aside,
propagation still leaves the feature undecided.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .config import Configuration, ConsequenceReport, derive_states
from .model import Feature, FeatureDiagram, FeatureKind, GroupKind

INTERACTIVE_KINDS = ("checkbox",)


@dataclass
class WidgetNode:
    kind: str  # panel | group_title | checkbox | radio_group | checkbox_group | label
    ref: str
    title: str | None = None
    validation: str | None = None  # exactly-one | at-least-one
    children: list["WidgetNode"] = field(default_factory=list)

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class EnablementBinding:
    widget: str
    condition: str = "decision-open"


@dataclass
class Omission:
    feature: str
    reason: str


@dataclass
class WidgetTree:
    diagram: FeatureDiagram
    root: WidgetNode
    bindings: list[EnablementBinding]
    omissions: list[Omission]

    def nodes(self):
        yield from self.root.walk()

    def widget_for(self, feature: str) -> WidgetNode | None:
        ref = f"feature:{feature}"
        for node in self.nodes():
            if node.ref == ref:
                return node
        return None


@dataclass
class Notification:
    trigger: tuple[str, bool | None]
    affected: tuple[tuple[str, bool | None], ...]
    panel: str
    cross_panel: bool = True


def transform(d: FeatureDiagram, omit_childless_mandatory: bool = False) -> WidgetTree:
    """Deterministic widget tree in document order.

    Mandatory features render as non-interactive group titles; with
    `omit_childless_mandatory` the childless ones are dropped and recorded
    as omissions instead.
    """
    bindings: list[EnablementBinding] = []
    omissions: list[Omission] = []

    def checkbox(f: Feature) -> WidgetNode:
        node = WidgetNode("checkbox", f"feature:{f.name}", title=f.name)
        bindings.append(EnablementBinding(node.ref))
        return node

    def contents(f: Feature) -> list[WidgetNode]:
        out: list[WidgetNode] = []
        for index, g in enumerate(f.groups):
            if g.kind is GroupKind.AND:
                member = g.members[0]
                out.extend(and_member_nodes(member))
            else:
                group_kind = "checkbox_group" if g.kind is GroupKind.OR else "radio_group"
                validation = "at-least-one" if g.kind is GroupKind.OR else "exactly-one"
                group_node = WidgetNode(
                    group_kind,
                    f"group:{f.name}:{index}",
                    title=None,
                    validation=validation,
                    children=[checkbox(m) for m in g.members],
                )
                out.append(group_node)
                for m in g.members:
                    if m.children:
                        out.append(wrapper_panel(m))
        return out

    def wrapper_panel(f: Feature) -> WidgetNode:
        return WidgetNode("panel", f"panel:{f.name}", title=f.name, children=contents(f))

    def and_member_nodes(f: Feature) -> list[WidgetNode]:
        if f.kind is FeatureKind.MANDATORY:
            if not f.children and omit_childless_mandatory:
                omissions.append(Omission(f.name, "childless-mandatory"))
                return []
            return [WidgetNode("group_title", f"feature:{f.name}", title=f.name, children=contents(f))]
        node = checkbox(f)
        if f.children:
            node.children.append(wrapper_panel(f))
        return [node]

    root = WidgetNode("panel", f"feature:{d.root.name}", title=d.root.name, children=contents(d.root))
    return WidgetTree(d, root, bindings, omissions)


def serialize_tree(t: WidgetTree) -> str:
    """Byte-stable JSON rendering for golden tests and the wire."""

    def node_payload(node: WidgetNode) -> dict:
        return {
            "children": [node_payload(c) for c in node.children],
            "kind": node.kind,
            "ref": node.ref,
            "title": node.title,
            "validation": node.validation,
        }

    payload = {
        "bindings": [{"condition": b.condition, "widget": b.widget} for b in t.bindings],
        "omissions": [{"feature": o.feature, "reason": o.reason} for o in t.omissions],
        "root": node_payload(t.root),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def compute_enablement(t: WidgetTree, c: Configuration) -> dict[str, bool]:
    """Per-widget enabled flags; non-interactive widgets are always False."""
    if c.diagram is not t.diagram and c.diagram.feature_names() != t.diagram.feature_names():
        raise ValueError("configuration does not match the widget tree's diagram")
    open_without_own: dict[str, bool] = {}
    for name in c.diagram.feature_names():
        if name in c.user_decisions:
            others = {k: v for k, v in c.user_decisions.items() if k != name}
            open_without_own[name] = derive_states(c.diagram, others)[name] is None
        else:
            open_without_own[name] = c.derived_state[name] is None
    out: dict[str, bool] = {}
    for node in t.nodes():
        if node.kind in INTERACTIVE_KINDS and node.ref.startswith("feature:"):
            out[node.ref] = open_without_own[node.ref.split(":", 1)[1]]
        else:
            out[node.ref] = False
    return out


def _panel_feature(d: FeatureDiagram, feature: str) -> str:
    """Nearest strict ancestor that renders as a panel (has children)."""
    parent = d.parent_of(feature)
    while parent is not None:
        if d.feature(parent).children:
            return parent
        parent = d.parent_of(parent)
    return d.root.name


def derive_notifications(
    t: WidgetTree,
    report: ConsequenceReport,
    trigger: str,
    trigger_value: bool | None = None,
) -> list[Notification]:
    """Cross-panel consequences that enable/disable feedback cannot show.

    Changes whose panel lies inside the subtree of the trigger's own panel
    are visible next to the control that caused them; everything else is
    grouped into one notification per foreign panel.
    """
    d = t.diagram
    if trigger_value is None:
        for name, _old, new in report.changed:
            if name == trigger:
                trigger_value = new
                break
    trigger_panel = _panel_feature(d, trigger)
    trigger_scope = set(d.subtree_names(trigger_panel))
    omitted = {o.feature for o in t.omissions}
    by_panel: dict[str, list[tuple[str, bool | None]]] = {}
    for name, _old, new in report.changed:
        if name in omitted:
            continue
        panel = _panel_feature(d, name)
        if panel in trigger_scope:
            continue
        by_panel.setdefault(panel, []).append((name, new))
    return [
        Notification(trigger=(trigger, trigger_value), affected=tuple(changes), panel=panel)
        for panel, changes in by_panel.items()
    ]
