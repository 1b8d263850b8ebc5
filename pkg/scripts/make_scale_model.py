#!/usr/bin/env python3
"""Regenerates fixtures/scale200.fm (deterministic, seeded).

The diagram has exactly 200 features, a handful of cross-tree constraints,
and far more than 10^17 valid configurations.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fmgen.model import (
    ConstraintKind,
    CrossTreeConstraint,
    Feature,
    FeatureDiagram,
    FeatureKind,
    Group,
    GroupKind,
    count_variants,
    serialize_model,
    validate_model,
)

SIZE = 200
SEED = 20260808


def build() -> FeatureDiagram:
    rng = random.Random(SEED)
    names = [f"Feat{i:03d}" for i in range(SIZE)]
    placed = [names[0]]

    def grow(name: str, budget: int) -> Feature:
        groups: list[Group] = []
        remaining = budget
        while remaining > 0:
            kind = rng.choice(["and", "and", "and", "or", "alternative"])
            if kind != "and" and remaining < 2:
                kind = "and"
            if kind == "and":
                child_budget = rng.randint(0, min(remaining - 1, 6))
                child_name = names[len(placed)]
                placed.append(child_name)
                child = grow(child_name, child_budget)
                child.kind = rng.choice([FeatureKind.MANDATORY, FeatureKind.OPTIONAL, FeatureKind.OPTIONAL])
                groups.append(Group(GroupKind.AND, (child,)))
                remaining -= 1 + child_budget
            else:
                member_count = rng.randint(2, min(4, remaining))
                remaining -= member_count
                members = []
                for _ in range(member_count):
                    child_budget = rng.randint(0, min(remaining, 4)) if remaining else 0
                    remaining -= child_budget
                    child_name = names[len(placed)]
                    placed.append(child_name)
                    members.append(grow(child_name, child_budget))
                group_kind = GroupKind.OR if kind == "or" else GroupKind.ALTERNATIVE
                groups.append(Group(group_kind, tuple(members)))
        return Feature(name, None, tuple(groups), {})

    root = grow(names[0], SIZE - 1)
    assert len(placed) == SIZE

    # A few constraints between shallow features keeps counting interesting
    # without blowing up the constrained-assignment enumeration.
    constraints = []
    rng2 = random.Random(SEED + 1)
    attempts = 0
    while len(constraints) < 5 and attempts < 200:
        attempts += 1
        a, b = rng2.sample(names[20:120], 2)
        kind = rng2.choice([ConstraintKind.REQUIRES, ConstraintKind.EXCLUDES])
        candidate = FeatureDiagram(root, tuple(constraints + [CrossTreeConstraint(kind, a, b)]))
        if count_variants(candidate) > 10**17 and not validate_model(candidate):
            constraints.append(CrossTreeConstraint(kind, a, b))
    return FeatureDiagram(root, tuple(constraints))


def main() -> None:
    diagram = build()
    count = count_variants(diagram)
    assert count > 10**17, count
    out = Path(__file__).resolve().parent.parent / "fixtures" / "scale200.fm"
    out.write_text(serialize_model(diagram), encoding="utf-8")
    print(f"wrote {out} ({len(diagram.feature_names())} features, {count} variants)")


if __name__ == "__main__":
    main()
