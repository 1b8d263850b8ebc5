"""Turns a complete configuration into a generated file tree.

Each output rule names a target file, a root frame, a marker comment
prefix, and an ordered list of fill actions.  Actions may be guarded on a
feature's 0/1 value; guarded actions whose feature is deselected simply do
not fire, which is how deselected subsystems leave no trace in the output.
The run also writes the specification document, a MANIFEST with content
digests, and a fill record that later roundtrip runs diff edited output
against.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path, PurePosixPath
from typing import Mapping

from .config import Configuration, status
from .frames import (
    ExtractError,
    Fill,
    FrameError,
    FrameInstance,
    FrameLibrary,
    MarkerConfig,
    expand,
    extract,
    instantiate,
    serialize_frames,
)
from .model import FeatureDiagram, serialize_model
from .specxml import InvalidConfigurationError, emit_spec

SPEC_FILENAME = "specification.xml"
MANIFEST_FILENAME = "MANIFEST"
FILLS_FILENAME = "MANIFEST.fills.json"
RESERVED_FILENAMES = (SPEC_FILENAME, MANIFEST_FILENAME, FILLS_FILENAME)


class RuleError(Exception):
    """Bad rule source or rules that do not bind to diagram and frames."""


class GenerateError(Exception):
    pass


@dataclass(frozen=True)
class FrameCall:
    frame: str
    params: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Action:
    guard: tuple[str, bool] | None
    slot_path: str
    text: str | None = None
    call: FrameCall | None = None


@dataclass(frozen=True)
class OutputRule:
    target: str
    root_frame: str
    markers: MarkerConfig
    actions: tuple[Action, ...]


@dataclass(frozen=True)
class RuleSet:
    outputs: tuple[OutputRule, ...]


@dataclass(frozen=True)
class Manifest:
    inputs_digest: str
    entries: tuple[tuple[str, int, str], ...]  # (path, bytes, sha256) sorted by path

    def render(self) -> str:
        lines = [f"inputs\t{self.inputs_digest}"]
        lines.extend(f"{path}\t{size}\t{digest}" for path, size, digest in self.entries)
        return "\n".join(lines) + "\n"


_STRING_RE = re.compile(r'"((?:[^"\\]|\\.)*)"')
_SLOT_STEP_RE = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)(?:\[(\d+)\])?$")


def _unescape(raw: str) -> str:
    return raw.replace("\\n", "\n").replace('\\"', '"').replace("\\\\", "\\")


def _parse_string(s: str, lineno: int) -> tuple[str, str]:
    m = _STRING_RE.match(s)
    if not m:
        raise RuleError(f"line {lineno}: expected quoted string at {s[:30]!r}")
    return _unescape(m.group(1)), s[m.end():]


def _validate_target(target: str, lineno: int) -> str:
    p = PurePosixPath(target)
    if p.is_absolute() or ".." in p.parts or target.startswith("~"):
        raise RuleError(f"line {lineno}: target path must be relative without '..': {target!r}")
    if target in RESERVED_FILENAMES:
        raise RuleError(f"line {lineno}: target path {target!r} is reserved")
    return target


def parse_rules(
    text: str,
    diagram: FeatureDiagram | None = None,
    library: FrameLibrary | None = None,
) -> RuleSet:
    """Parse a rule file; with diagram/library given, also bind-check it."""
    outputs: list[OutputRule] = []
    current_target: str | None = None
    current_frame: str | None = None
    current_markers: MarkerConfig | None = None
    current_actions: list[Action] = []

    def flush() -> None:
        nonlocal current_target
        if current_target is None:
            return
        outputs.append(
            OutputRule(current_target, current_frame, current_markers, tuple(current_actions))
        )
        current_target = None
        current_actions.clear()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#") or not line:
            continue
        if line.startswith("output "):
            flush()
            m = re.match(r"^output\s+(\S+)\s+root\s+([A-Za-z][A-Za-z0-9_]*)\s+markers\s+(.+)$", line)
            if not m:
                raise RuleError(f"line {lineno}: expected 'output <path> root <Frame> markers <prefix>'")
            current_target = _validate_target(m.group(1), lineno)
            current_frame = m.group(2)
            prefix = m.group(3).strip()
            if prefix.startswith('"'):
                prefix, rest = _parse_string(prefix, lineno)
                if rest.strip():
                    raise RuleError(f"line {lineno}: trailing text after marker prefix")
            current_markers = MarkerConfig(prefix)
            continue
        if current_target is None:
            raise RuleError(f"line {lineno}: action before any 'output' line")
        guard: tuple[str, bool] | None = None
        body = line
        if body.startswith("when "):
            m = re.match(r"^when\s+([A-Za-z][A-Za-z0-9_]*)\s*=\s*([01])\s*:\s*(.*)$", body)
            if not m:
                raise RuleError(f"line {lineno}: expected 'when <Feature> = <0|1> : <fill>'")
            guard = (m.group(1), m.group(2) == "1")
            body = m.group(3)
        m = re.match(r"^fill\s+(\S+)\s+with\s+(.*)$", body)
        if not m:
            raise RuleError(f"line {lineno}: expected 'fill <slotpath> with ...'")
        slot_path, effect = m.group(1), m.group(2).strip()
        for step in slot_path.split("/"):
            if not _SLOT_STEP_RE.match(step):
                raise RuleError(f"line {lineno}: bad slot path step {step!r}")
        if effect.startswith("text "):
            value, rest = _parse_string(effect[len("text "):].strip(), lineno)
            if rest.strip():
                raise RuleError(f"line {lineno}: trailing text after string")
            current_actions.append(Action(guard, slot_path, text=value))
            continue
        m = re.match(r"^([A-Za-z][A-Za-z0-9_]*)\s*\((.*)\)\s*$", effect)
        if not m:
            raise RuleError(f"line {lineno}: expected 'text \"...\"' or '<Frame>(...)'")
        frame_name, params_src = m.group(1), m.group(2).strip()
        params: list[tuple[str, str]] = []
        while params_src:
            pm = re.match(r"^([A-Za-z][A-Za-z0-9_]*)\s*=\s*", params_src)
            if not pm:
                raise RuleError(f"line {lineno}: expected 'name=\"value\"' in frame parameters")
            value, params_src = _parse_string(params_src[pm.end():], lineno)
            params.append((pm.group(1), value))
            params_src = params_src.lstrip()
            if params_src.startswith(","):
                params_src = params_src[1:].lstrip()
        current_actions.append(Action(guard, slot_path, call=FrameCall(frame_name, tuple(params))))
    flush()

    targets = [o.target for o in outputs]
    for target in targets:
        if targets.count(target) > 1:
            raise RuleError(f"duplicate target path {target!r}")
    ruleset = RuleSet(tuple(outputs))
    if diagram is not None and library is not None:
        bind_rules(ruleset, diagram, library)
    return ruleset


def bind_rules(rules: RuleSet, diagram: FeatureDiagram, library: FrameLibrary) -> None:
    """Check every frame, slot and feature reference; raise RuleError."""

    def lookup(name: str):
        try:
            return library.frame(name)
        except FrameError as e:
            raise RuleError(str(e)) from None

    for output in rules.outputs:
        root = lookup(output.root_frame)
        for action in output.actions:
            if action.guard is not None and not diagram.has_feature(action.guard[0]):
                raise RuleError(f"guard references unknown feature {action.guard[0]!r}")
            steps = action.slot_path.split("/")
            first = _SLOT_STEP_RE.match(steps[0]).group(1)
            if first not in root.slots:
                raise RuleError(f"frame {root.name!r} has no slot {first!r}")
            # deeper steps depend on instances created by earlier actions;
            # they are checked during generation
            if action.call is not None:
                called = lookup(action.call.frame)
                for param, _value in action.call.params:
                    if param not in called.slots:
                        raise RuleError(f"frame {called.name!r} has no slot {param!r}")


def _quote(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{escaped}"'


def serialize_rules(rules: RuleSet) -> str:
    lines: list[str] = []
    for output in rules.outputs:
        prefix = _quote(output.markers.comment_prefix)
        lines.append(f"output {output.target} root {output.root_frame} markers {prefix}")
        for action in output.actions:
            head = ""
            if action.guard is not None:
                head = f"when {action.guard[0]} = {1 if action.guard[1] else 0} : "
            if action.text is not None:
                lines.append(f"{head}fill {action.slot_path} with text {_quote(action.text)}")
            else:
                params = ", ".join(f"{p}={_quote(v)}" for p, v in action.call.params)
                lines.append(f"{head}fill {action.slot_path} with {action.call.frame}({params})")
    return "\n".join(lines) + "\n"


def _navigate(root: FrameInstance, slot_path: str) -> tuple[FrameInstance, str]:
    steps = slot_path.split("/")
    node = root
    for step in steps[:-1]:
        m = _SLOT_STEP_RE.match(step)
        slot, index = m.group(1), int(m.group(2) or 0)
        if slot not in node.frame.slots:
            raise GenerateError(f"frame {node.frame.name!r} has no slot {slot!r}")
        fills = node.fills.get(slot, ())
        if index >= len(fills) or not isinstance(fills[index], FrameInstance):
            raise GenerateError(f"slot path {slot_path!r}: no frame instance at {step!r}")
        node = fills[index]
    last = _SLOT_STEP_RE.match(steps[-1])
    slot = last.group(1)
    if last.group(2) is not None:
        raise GenerateError(f"slot path {slot_path!r}: final step must not carry an index")
    if slot not in node.frame.slots:
        raise GenerateError(f"frame {node.frame.name!r} has no slot {slot!r}")
    return node, slot


def _append_fill(node: FrameInstance, slot: str, value: Fill) -> None:
    fills = list(node.fills.get(slot, ()))
    if isinstance(value, str) and fills and isinstance(fills[-1], str):
        fills[-1] = fills[-1] + value
    else:
        fills.append(value)
    node.fills[slot] = tuple(fills)


def record_fills(instance: FrameInstance, path: str | None = None) -> dict[str, str]:
    """Flat map of every literal fill: '<instance path>/<slot>[<pos>]' -> text."""
    path = path or instance.frame.name
    out: dict[str, str] = {}
    for slot in instance.frame.slots:
        child_index = 0
        for position, fill in enumerate(instance.fills.get(slot, ())):
            if isinstance(fill, str):
                out[f"{path}/{slot}[{position}]"] = fill
            else:
                child_path = f"{path}/{slot}[{child_index}]:{fill.frame.name}"
                out.update(record_fills(fill, child_path))
                child_index += 1
    return out


def _apply_overlay(instance: FrameInstance, overlay: Mapping[str, str], path: str) -> None:
    for slot in instance.frame.slots:
        fills = list(instance.fills.get(slot, ()))
        child_index = 0
        for position, fill in enumerate(fills):
            if isinstance(fill, str):
                key = f"{path}/{slot}[{position}]"
                if key in overlay:
                    fills[position] = overlay[key]
            else:
                child_path = f"{path}/{slot}[{child_index}]:{fill.frame.name}"
                _apply_overlay(fill, overlay, child_path)
                child_index += 1
        if fills:
            instance.fills[slot] = tuple(fills)


def build_output_instance(
    output: OutputRule,
    c: Configuration,
    library: FrameLibrary,
    overlay: Mapping[str, str] | None = None,
) -> FrameInstance:
    root = instantiate(library, output.root_frame)
    for action in output.actions:
        if action.guard is not None:
            feature, wanted = action.guard
            state = c.derived_state[feature]
            assert state is not None, "complete configurations leave nothing undecided"
            if state != wanted:
                continue
        node, slot = _navigate(root, action.slot_path)
        if action.text is not None:
            _append_fill(node, slot, action.text)
        else:
            params = {p: [v] for p, v in action.call.params}
            _append_fill(node, slot, instantiate(library, action.call.frame, params))
    if overlay:
        _apply_overlay(root, overlay, root.frame.name)
    return root


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def inputs_digest(
    d: FeatureDiagram, c: Configuration, library: FrameLibrary, rules: RuleSet
) -> str:
    blob = "\0".join(
        [serialize_model(d), emit_spec(c), serialize_frames(library), serialize_rules(rules)]
    )
    return _digest(blob.encode("utf-8"))


def generate(
    d: FeatureDiagram,
    c: Configuration,
    library: FrameLibrary,
    rules: RuleSet,
    out_root: str | Path,
    overlay: Mapping[str, Mapping[str, str]] | None = None,
) -> Manifest:
    """Expand every output rule and write the tree under out_root.

    Deterministic: identical inputs produce byte-identical trees.  The
    optional overlay maps target path -> literal-fill overrides recorded
    by roundtrip_update.
    """
    result = status(c)
    if not result.complete:
        raise InvalidConfigurationError(list(result.obligations))
    bind_rules(rules, d, library)
    root_dir = Path(out_root)
    root_dir.mkdir(parents=True, exist_ok=True)

    entries: list[tuple[str, int, str]] = []
    fill_records: dict[str, dict[str, str]] = {}

    def write(rel_path: str, data: bytes) -> None:
        target = root_dir / rel_path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        entries.append((rel_path, len(data), _digest(data)))

    for output in rules.outputs:
        instance = build_output_instance(output, c, library, (overlay or {}).get(output.target))
        text = expand(instance, output.markers)
        write(output.target, text.encode("utf-8"))
        fill_records[output.target] = record_fills(instance)

    write(SPEC_FILENAME, emit_spec(c).encode("utf-8"))

    manifest = Manifest(inputs_digest(d, c, library, rules), tuple(sorted(entries)))
    (root_dir / MANIFEST_FILENAME).write_text(manifest.render(), encoding="utf-8")
    (root_dir / FILLS_FILENAME).write_text(
        json.dumps(fill_records, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


@dataclass(frozen=True)
class FillDifference:
    target: str
    key: str
    kind: str  # changed | added | removed
    recorded: str | None
    current: str | None


@dataclass(frozen=True)
class RoundtripReport:
    differences: tuple[FillDifference, ...]

    def overlay(self) -> dict[str, dict[str, str]]:
        """In-place literal edits as an overlay for the next generate run."""
        out: dict[str, dict[str, str]] = {}
        for diff in self.differences:
            if diff.kind == "changed":
                out.setdefault(diff.target, {})[diff.key] = diff.current
        return out


def roundtrip_update(
    out_root: str | Path, library: FrameLibrary, rules: RuleSet
) -> RoundtripReport:
    """Diff literal fills in (possibly edited) output against the last run."""
    root_dir = Path(out_root)
    fills_path = root_dir / FILLS_FILENAME
    if not fills_path.is_file():
        raise GenerateError(f"no fill record at {fills_path}; run generate first")
    recorded_by_target: dict[str, dict[str, str]] = json.loads(fills_path.read_text(encoding="utf-8"))

    differences: list[FillDifference] = []
    for output in rules.outputs:
        file_path = root_dir / output.target
        if not file_path.is_file():
            raise GenerateError(f"generated file missing: {output.target}")
        try:
            instance = extract(file_path.read_text(encoding="utf-8"), library, output.markers)
        except ExtractError as e:
            raise GenerateError(f"{output.target}: {e}") from None
        current = record_fills(instance)
        recorded = recorded_by_target.get(output.target, {})
        for key in sorted(set(recorded) | set(current)):
            if key not in current:
                differences.append(FillDifference(output.target, key, "removed", recorded[key], None))
            elif key not in recorded:
                differences.append(FillDifference(output.target, key, "added", None, current[key]))
            elif recorded[key] != current[key]:
                differences.append(
                    FillDifference(output.target, key, "changed", recorded[key], current[key])
                )
    return RoundtripReport(tuple(differences))
