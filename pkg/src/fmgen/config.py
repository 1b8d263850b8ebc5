"""Interactive specialization of a feature diagram.

A configuration separates what the user decided from what those decisions
entail.  The derived tri-state map (selected / deselected / undecided,
encoded as True / False / None) is always recomputed from the decision set
by a rule fixpoint, so retracting any decision simply recomputes the rest:
no interaction sequence can trap the user in an unreachable state.

Propagation rules:
  * deselecting a feature deselects its whole subtree
  * selecting a feature selects its ancestors and its mandatory members
  * in alternative groups one selected member deselects the rest, and
    deselecting all but one forces the survivor; or-groups force the last
    non-deselected member
  * requires/excludes constraints propagate in both directions

A decision whose fixpoint assigns both values to some feature is rejected
atomically with a replayable reason chain.  After the fixpoint, an exact
completion count guards against the rare dead ends the local rules cannot
see (e.g. mutually unsatisfiable constraints hiding behind a still-open
group choice); those are rejected as well.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .model import (
    ConstraintKind,
    FeatureDiagram,
    FeatureKind,
    GroupKind,
    Obligation,
    count_configurations,
    _check_well_formed,
)


class EngineError(Exception):
    """Misuse of the engine API (unknown feature, retract without decision)."""


def state_name(value: bool | None) -> str:
    if value is None:
        return "undecided"
    return "selected" if value else "deselected"


def decision_from_name(name: str) -> bool:
    if name == "selected" or name == "select":
        return True
    if name == "deselected" or name == "deselect":
        return False
    raise EngineError(f"unknown decision value {name!r}")


@dataclass(frozen=True)
class ReasonStep:
    rule: str
    premises: tuple[str, ...]
    feature: str | None
    value: bool | None

    def render(self) -> str:
        if self.feature is not None:
            conclusion = f"{self.feature} := {state_name(self.value)}"
            if self.premises:
                return f"{self.rule}({', '.join(self.premises)}) => {conclusion}"
            return f"{self.rule} => {conclusion}"
        return f"{self.rule}: {', '.join(self.premises)}"


@dataclass(frozen=True)
class Conflict:
    rejected: tuple[str, bool] | None
    steps: tuple[ReasonStep, ...]

    def reasons(self) -> list[str]:
        return [s.render() for s in self.steps]

    def render(self) -> str:
        head = "conflict"
        if self.rejected is not None:
            verb = "select" if self.rejected[1] else "deselect"
            head = f"conflict: cannot {verb} {self.rejected[0]}"
        return "\n".join([head] + ["  " + r for r in self.reasons()])


class ConflictError(Exception):
    def __init__(self, conflict: Conflict):
        super().__init__(conflict.render())
        self.conflict = conflict


@dataclass(frozen=True)
class ConsequenceReport:
    changed: tuple[tuple[str, bool | None, bool | None], ...]
    conflicts: tuple[Conflict, ...] = ()


@dataclass(frozen=True)
class Configuration:
    diagram: FeatureDiagram
    user_decisions: dict[str, bool]
    derived_state: dict[str, bool | None]

    def state(self, name: str) -> bool | None:
        self.diagram.feature(name)
        return self.derived_state[name]

    def states_by_name(self) -> dict[str, str]:
        return {n: state_name(v) for n, v in self.derived_state.items()}


@dataclass(frozen=True)
class Status:
    complete: bool
    obligations: tuple[Obligation, ...]


class _Contradiction(Exception):
    def __init__(self, feature: str, attempted: ReasonStep):
        self.feature = feature
        self.attempted = attempted


class _GroupViolation(Exception):
    def __init__(self, rule: str, parent: str, members: tuple[str, ...]):
        self.rule = rule
        self.parent = parent
        self.members = members


def derive_states(d: FeatureDiagram, decisions: Mapping[str, bool]) -> dict[str, bool | None]:
    """Least fixpoint of the propagation rules; raises ConflictError."""
    states, _ = _propagate(d, decisions)
    return states


def _propagate(
    d: FeatureDiagram, decisions: Mapping[str, bool]
) -> tuple[dict[str, bool | None], dict[str, ReasonStep]]:
    state: dict[str, bool | None] = {n: None for n in d.feature_names()}
    cause: dict[str, ReasonStep] = {}

    def assign(name: str, value: bool, rule: str, premises: tuple[str, ...]) -> bool:
        current = state[name]
        if current is None:
            step = ReasonStep(rule, premises, name, value)
            state[name] = value
            cause[name] = step
            return True
        if current == value:
            return False
        raise _Contradiction(name, ReasonStep(rule, premises, name, value))

    def explain(name: str, acc: list[ReasonStep], seen: set[str]) -> None:
        if name in seen:
            return
        seen.add(name)
        step = cause[name]
        for premise in step.premises:
            if premise != name:
                explain(premise, acc, seen)
        acc.append(step)

    try:
        assign(d.root.name, True, "root", ())
        for name, value in decisions.items():
            d.feature(name)
            assign(name, value, "decision", ())

        changed = True
        while changed:
            changed = False
            for f in d.features():
                s = state[f.name]
                if s is True:
                    parent = d.parent_of(f.name)
                    if parent is not None:
                        changed |= assign(parent, True, "select-parent", (f.name,))
                    for g in f.groups:
                        if g.kind is GroupKind.AND:
                            for m in g.members:
                                if m.kind is FeatureKind.MANDATORY:
                                    changed |= assign(m.name, True, "mandatory", (f.name,))
                elif s is False:
                    for child in f.children:
                        changed |= assign(child.name, False, "deselect-children", (f.name,))
            for f in d.features():
                if state[f.name] is not True:
                    continue
                for g in f.groups:
                    if g.kind is GroupKind.AND:
                        continue
                    selected = [m.name for m in g.members if state[m.name] is True]
                    deselected = [m.name for m in g.members if state[m.name] is False]
                    open_members = [m.name for m in g.members if state[m.name] is None]
                    if g.kind is GroupKind.ALTERNATIVE:
                        if selected:
                            for other in g.members:
                                if other.name != selected[0]:
                                    changed |= assign(
                                        other.name, False, "alternative-exclusion", (selected[0], f.name)
                                    )
                        elif len(open_members) == 1 and len(deselected) == len(g.members) - 1:
                            changed |= assign(
                                open_members[0], True, "alternative-last", (f.name, *deselected)
                            )
                        elif not open_members and not selected:
                            raise _GroupViolation(
                                "group-exactly-one", f.name, tuple(m.name for m in g.members)
                            )
                    else:
                        if not selected:
                            if not open_members:
                                raise _GroupViolation(
                                    "group-at-least-one", f.name, tuple(m.name for m in g.members)
                                )
                            if len(open_members) == 1:
                                changed |= assign(
                                    open_members[0], True, "or-last", (f.name, *deselected)
                                )
            for c in d.constraints:
                if c.kind is ConstraintKind.REQUIRES:
                    if state[c.source] is True:
                        changed |= assign(c.target, True, "requires", (c.source,))
                    if state[c.target] is False:
                        changed |= assign(c.source, False, "requires", (c.target,))
                else:
                    if state[c.source] is True:
                        changed |= assign(c.target, False, "excludes", (c.source,))
                    if state[c.target] is True:
                        changed |= assign(c.source, False, "excludes", (c.target,))
    except _Contradiction as contradiction:
        steps: list[ReasonStep] = []
        seen: set[str] = set()
        for premise in contradiction.attempted.premises:
            explain(premise, steps, seen)
        steps.append(contradiction.attempted)
        explain(contradiction.feature, steps, seen)
        raise ConflictError(Conflict(None, tuple(steps))) from None
    except _GroupViolation as violation:
        steps = []
        seen = set()
        explain(violation.parent, steps, seen)
        for member in violation.members:
            explain(member, steps, seen)
        steps.append(ReasonStep(violation.rule, (violation.parent, *violation.members), None, None))
        raise ConflictError(Conflict(None, tuple(steps))) from None
    return state, cause


def init_config(d: FeatureDiagram) -> Configuration:
    """Fresh configuration: root and its mandatory closure selected."""
    _check_well_formed(d)
    try:
        states = derive_states(d, {})
    except ConflictError as e:
        raise EngineError(f"diagram admits no configuration:\n{e.conflict.render()}") from None
    return Configuration(d, {}, states)


def apply_decision(
    c: Configuration, feature: str, value: bool
) -> tuple[Configuration, ConsequenceReport] | Conflict:
    """Record a user decision and propagate it, or reject it atomically."""
    d = c.diagram
    d.feature(feature)
    previous = c.user_decisions.get(feature)
    if previous is not None and previous != value:
        return Conflict(
            rejected=(feature, value),
            steps=(
                ReasonStep("decision", (), feature, value),
                ReasonStep("decision", (), feature, previous),
            ),
        )
    decisions = dict(c.user_decisions)
    decisions[feature] = value
    try:
        states = derive_states(d, decisions)
    except ConflictError as e:
        return replace(e.conflict, rejected=(feature, value))
    forced = {n: s for n, s in states.items() if s is not None}
    if count_configurations(d, forced) == 0:
        return Conflict(
            rejected=(feature, value),
            steps=(
                ReasonStep("decision", (), feature, value),
                ReasonStep("no-valid-completion", tuple(sorted(forced)), None, None),
            ),
        )
    changed = tuple(
        (n, c.derived_state[n], states[n])
        for n in d.feature_names()
        if c.derived_state[n] != states[n]
    )
    return Configuration(d, decisions, states), ConsequenceReport(changed)


def retract_decision(c: Configuration, feature: str) -> Configuration:
    """Drop one user decision and recompute everything that followed from it."""
    if feature not in c.user_decisions:
        raise EngineError(f"no user decision on {feature!r}")
    decisions = dict(c.user_decisions)
    del decisions[feature]
    states = derive_states(c.diagram, decisions)
    return Configuration(c.diagram, decisions, states)


def status(c: Configuration) -> Status:
    """Complete when nothing is undecided and every group is satisfied."""
    obligations = tuple(_obligations(c.diagram, c.derived_state))
    return Status(not obligations, obligations)


def _obligations(d: FeatureDiagram, state: Mapping[str, bool | None]) -> list[Obligation]:
    obligations: list[Obligation] = []
    listed_groups: set[int] = set()

    def ancestors_decided(name: str) -> bool:
        parent = d.parent_of(name)
        while parent is not None:
            if state[parent] is None:
                return False
            parent = d.parent_of(parent)
        return True

    def group_obligation(parent: str, g) -> None:
        if id(g) in listed_groups:
            return
        listed_groups.add(id(g))
        kind = "or-group" if g.kind is GroupKind.OR else "alternative-group"
        obligations.append(Obligation(kind, parent, tuple(m.name for m in g.members)))

    for name in d.feature_names():
        if state[name] is not None or not ancestors_decided(name):
            continue
        membership = d.group_of(name)
        if membership is not None and membership[1].kind is not GroupKind.AND:
            parent, g = membership
            selected = [m.name for m in g.members if state[m.name] is True]
            satisfied = bool(selected) if g.kind is GroupKind.OR else len(selected) == 1
            if satisfied:
                obligations.append(Obligation("undecided", name))
            else:
                group_obligation(parent.name, g)
        else:
            obligations.append(Obligation("undecided", name))

    for f in d.features():
        if state[f.name] is not True:
            continue
        for g in f.groups:
            if g.kind is GroupKind.AND:
                continue
            if any(state[m.name] is None for m in g.members):
                continue  # handled above
            selected = [m.name for m in g.members if state[m.name] is True]
            if g.kind is GroupKind.OR and not selected:
                group_obligation(f.name, g)
            if g.kind is GroupKind.ALTERNATIVE and len(selected) != 1:
                group_obligation(f.name, g)
    return obligations


def assignment_obligations(d: FeatureDiagram, selection: Mapping[str, bool]) -> list[Obligation]:
    """Everything wrong with a complete 0/1 assignment (for spec validation)."""
    obligations: list[Obligation] = []
    state: dict[str, bool | None] = {n: bool(selection[n]) for n in d.feature_names()}
    if state[d.root.name] is not True:
        obligations.append(Obligation("root-deselected", d.root.name))
    for f in d.features():
        parent = d.parent_of(f.name)
        if state[f.name] and parent is not None and not state[parent]:
            obligations.append(Obligation("orphan-selected", f.name))
        if not state[f.name]:
            continue
        for g in f.groups:
            if g.kind is GroupKind.AND:
                for m in g.members:
                    if m.kind is FeatureKind.MANDATORY and not state[m.name]:
                        obligations.append(Obligation("mandatory-missing", m.name))
    obligations.extend(_obligations(d, state))
    for c in d.constraints:
        if c.kind is ConstraintKind.REQUIRES and state[c.source] and not state[c.target]:
            obligations.append(Obligation("requires-violated", c.source, (c.target,)))
        if c.kind is ConstraintKind.EXCLUDES and state[c.source] and state[c.target]:
            obligations.append(Obligation("excludes-violated", c.source, (c.target,)))
    return obligations


def finalize(c: Configuration, policy: str = "strict") -> Configuration | Conflict:
    """Close a configuration.

    strict: the configuration must already be complete.
    default-off: undecided optional and or-group members are deselected
    wherever propagation permits; alternative choices are never defaulted.
    """
    if policy not in ("strict", "default-off"):
        raise EngineError(f"unknown policy {policy!r}")
    current = c
    if policy == "default-off":
        for name in c.diagram.feature_names():
            if current.derived_state[name] is not None:
                continue
            membership = c.diagram.group_of(name)
            if membership is not None and membership[1].kind is GroupKind.ALTERNATIVE:
                continue
            outcome = apply_decision(current, name, False)
            if isinstance(outcome, Conflict):
                continue
            current = outcome[0]
    result = status(current)
    if not result.complete:
        steps = tuple(
            ReasonStep(f"unresolved-{ob.kind}", (ob.subject, *ob.members), None, None)
            for ob in result.obligations
        )
        return Conflict(rejected=None, steps=steps)
    return current


def parse_decisions(text: str) -> list[tuple[str, bool]]:
    """Decision files: one `select Name` or `deselect Name` per line."""
    out: list[tuple[str, bool]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0] not in ("select", "deselect"):
            raise EngineError(f"line {lineno}: expected 'select <Name>' or 'deselect <Name>'")
        out.append((parts[1], parts[0] == "select"))
    return out
