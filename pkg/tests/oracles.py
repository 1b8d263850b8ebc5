"""Independent oracles used across the test suite.

The enumeration oracle counts valid configurations by brute force over
feature subsets encoded as bitmasks.  It shares nothing with the
compositional counter in fmgen.model beyond the diagram structure itself.
"""

from __future__ import annotations

import random

from fmgen.model import (
    ConstraintKind,
    CrossTreeConstraint,
    Feature,
    FeatureDiagram,
    FeatureKind,
    Group,
    GroupKind,
)


class MaskModel:
    """Bitmask view of a diagram for fast validity checks."""

    def __init__(self, d: FeatureDiagram):
        self.names = list(d.feature_names())
        self.index = {n: i for i, n in enumerate(self.names)}
        self.n = len(self.names)
        self.root_bit = 1 << self.index[d.root.name]
        # (feature bit, parent bit) for the child => parent rule
        self.parent_pairs: list[tuple[int, int]] = []
        # (feature bit, mask of mandatory and-members)
        self.mandatory: list[tuple[int, int]] = []
        # (parent bit, member mask) per alternative / or group
        self.alternatives: list[tuple[int, int]] = []
        self.ors: list[tuple[int, int]] = []
        for f in d.features():
            fbit = 1 << self.index[f.name]
            mand = 0
            for g in f.groups:
                member_mask = 0
                for m in g.members:
                    mbit = 1 << self.index[m.name]
                    member_mask |= mbit
                    self.parent_pairs.append((mbit, fbit))
                    if g.kind is GroupKind.AND and m.kind is FeatureKind.MANDATORY:
                        mand |= mbit
                if g.kind is GroupKind.ALTERNATIVE:
                    self.alternatives.append((fbit, member_mask))
                elif g.kind is GroupKind.OR:
                    self.ors.append((fbit, member_mask))
            if mand:
                self.mandatory.append((fbit, mand))
        self.requires: list[tuple[int, int]] = []
        self.excludes: list[tuple[int, int]] = []
        for c in d.constraints:
            a = 1 << self.index[c.source]
            b = 1 << self.index[c.target]
            if c.kind is ConstraintKind.REQUIRES:
                self.requires.append((a, b))
            else:
                self.excludes.append((a, b))

    def valid(self, mask: int) -> bool:
        if not mask & self.root_bit:
            return False
        for child, parent in self.parent_pairs:
            if mask & child and not mask & parent:
                return False
        for fbit, mand in self.mandatory:
            if mask & fbit and mask & mand != mand:
                return False
        for fbit, members in self.alternatives:
            if mask & fbit and (mask & members).bit_count() != 1:
                return False
        for fbit, members in self.ors:
            if mask & fbit and not mask & members:
                return False
        for a, b in self.requires:
            if mask & a and not mask & b:
                return False
        for a, b in self.excludes:
            if mask & a and mask & b:
                return False
        return True

    def valid_masks(self) -> list[int]:
        return [m for m in range(1 << self.n) if self.valid(m)]

    def selection(self, mask: int) -> frozenset[str]:
        return frozenset(n for n, i in self.index.items() if mask >> i & 1)


def enumerate_valid_selections(d: FeatureDiagram) -> list[frozenset[str]]:
    mm = MaskModel(d)
    return [mm.selection(m) for m in mm.valid_masks()]


def enumeration_count(d: FeatureDiagram) -> int:
    """Brute-force variant count; exponential, keep diagrams small."""
    return len(MaskModel(d).valid_masks())


def enumeration_count_forced(d: FeatureDiagram, forced: dict[str, bool]) -> int:
    mm = MaskModel(d)
    need_on = 0
    need_off = 0
    for name, value in forced.items():
        bit = 1 << mm.index[name]
        if value:
            need_on |= bit
        else:
            need_off |= bit
    return sum(
        1
        for m in range(1 << mm.n)
        if m & need_on == need_on and not m & need_off and mm.valid(m)
    )


def random_diagram(
    rng: random.Random,
    size: int,
    max_constraints: int = 3,
    name_prefix: str = "F",
) -> FeatureDiagram:
    """Random well-formed diagram with `size` features in total."""
    assert size >= 1
    names = [f"{name_prefix}{i}" for i in range(size)]
    budget = size - 1  # features left to place below the root

    placed = [names[0]]

    def build(name: str, allocation: int) -> Feature:
        groups: list[Group] = []
        remaining = allocation
        while remaining > 0:
            kind = rng.choice(["and", "and", "or", "alternative"])
            if kind != "and" and remaining < 2:
                kind = "and"
            if kind == "and":
                child_alloc = rng.randint(0, remaining - 1)
                child_name = names[len(placed)]
                placed.append(child_name)
                child = build(child_name, child_alloc)
                child.kind = rng.choice([FeatureKind.MANDATORY, FeatureKind.OPTIONAL])
                groups.append(Group(GroupKind.AND, (child,)))
                remaining -= 1 + child_alloc
            else:
                members_n = rng.randint(2, min(4, remaining))
                remaining -= members_n
                members = []
                for _ in range(members_n):
                    child_alloc = rng.randint(0, remaining) if remaining else 0
                    remaining -= child_alloc
                    child_name = names[len(placed)]
                    placed.append(child_name)
                    members.append(build(child_name, child_alloc))
                gk = GroupKind.OR if kind == "or" else GroupKind.ALTERNATIVE
                groups.append(Group(gk, tuple(members)))
        return Feature(name, None, tuple(groups), {})

    root = build(names[0], budget)

    constraints: list[CrossTreeConstraint] = []
    if size >= 3 and max_constraints > 0:
        for _ in range(rng.randint(0, max_constraints)):
            a, b = rng.sample(names, 2)
            kind = rng.choice([ConstraintKind.REQUIRES, ConstraintKind.EXCLUDES])
            constraints.append(CrossTreeConstraint(kind, a, b))
    return FeatureDiagram(root, tuple(constraints))


# ---------------------------------------------------------------------------
# Random frame libraries and instances for roundtrip properties.
#
# Frame bodies separate slots with distinctive ::sepN:: literal lines and
# fills draw words from a different alphabet, so the leftmost anchor match
# used by extraction is never ambiguous.

FILL_WORDS = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",
    "hotel", "india", "juliet", "kilo", "lima",
]


def random_frame_library(rng: random.Random, max_frames: int = 4):
    from fmgen.frames import parse_frames

    chunks = []
    for i in range(rng.randint(1, max_frames)):
        slots = [f"s{j}" for j in range(rng.randint(0, 3))]
        parts = [f"::head{i}::"]
        for j, slot in enumerate(slots):
            parts.append(f"<<{slot}>>")
            parts.append(f"::sep{i}_{j}::")
        body = "\n".join(parts)
        chunks.append(f"frame Fr{i} ({', '.join(slots)}) <<<ZZ\n{body}\nZZ\n")
    return parse_frames("\n".join(chunks))


def random_fill_text(rng: random.Random) -> str:
    text = " ".join(rng.choices(FILL_WORDS, k=rng.randint(1, 3)))
    if rng.random() < 0.3:
        text += "\n"
    return text


def random_frame_instance(lib, rng: random.Random, depth: int = 0, max_depth: int = 5):
    from fmgen.frames import instantiate

    name = rng.choice(list(lib.frames))
    frame = lib.frame(name)
    fills = {}
    for slot in frame.slots:
        values = []
        for _ in range(rng.randint(0, 4 if depth < max_depth else 1)):
            if depth < max_depth and rng.random() < 0.4:
                values.append(random_frame_instance(lib, rng, depth + 1, max_depth))
            else:
                values.append(random_fill_text(rng))
        if values:
            fills[slot] = values
    return instantiate(lib, name, fills)


def literal_fill_sites(instance, path=None):
    """(container, slot, position) of every literal fill, depth first."""
    path = path or []
    sites = []
    for slot in instance.frame.slots:
        for position, fill in enumerate(instance.fills.get(slot, ())):
            if isinstance(fill, str):
                sites.append((instance, slot, position))
            else:
                sites.extend(literal_fill_sites(fill))
    return sites
