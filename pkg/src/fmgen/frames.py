"""Frame/slot templates: parse, instantiate, expand, and extract back.

A frame is template text with named holes (``<<slot>>``; a literal ``<<``
is written ``<<<<``).  Holes accept ordered lists of literal text and
nested frame instances.  Expansion wraps every instance in begin/end
marker lines carrying the instance path, so the instance tree - including
hand edits to literal fill content - can be recovered from generated
output.

Marker blocks always sit on their own lines.  A nested block contributes
``"\\n" + begin line + "\\n" + body + "\\n" + end line + "\\n"`` to the
output: the fixed newlines around the marker lines belong to the block,
never to the surrounding literal text, which keeps extraction exact byte
for byte.  Content lines that would themselves look like a marker are
escaped with a backslash after the comment prefix and unescaped again on
extraction.

Extraction matches each region against its frame's fixed body text.
Fixed segments are located leftmost; a slot's content is everything up to
the next fixed segment.  Two slots with no fixed text between them are
ambiguous - the earlier slot comes back empty - so frame authors should
separate slots.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .model import NAME_RE


class FrameError(Exception):
    """Bad frame source, fills, or marker configuration."""


class ExtractError(FrameError):
    """Generated output cannot be mapped back onto the frame library."""


# Body segments: ("lit", text) or ("slot", name)
Segment = tuple[str, str]


@dataclass(frozen=True)
class Frame:
    name: str
    slots: tuple[str, ...]
    segments: tuple[Segment, ...]

    @property
    def body(self) -> str:
        out = []
        for kind, value in self.segments:
            if kind == "lit":
                out.append(value.replace("<<", "<<<<"))
            else:
                out.append(f"<<{value}>>")
        return "".join(out)


Fill = Union[str, "FrameInstance"]


@dataclass
class FrameInstance:
    frame: Frame
    fills: dict[str, tuple[Fill, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class FrameLibrary:
    frames: dict[str, Frame]

    def frame(self, name: str) -> Frame:
        try:
            return self.frames[name]
        except KeyError:
            raise FrameError(f"unknown frame {name!r}") from None


@dataclass(frozen=True)
class MarkerConfig:
    comment_prefix: str = "#"
    begin_template: str = "BEGIN-FRAME {path}"
    end_template: str = "END-FRAME {path}"

    def __post_init__(self):
        for template in (self.begin_template, self.end_template):
            if "{path}" not in template:
                raise FrameError("marker templates must contain {path}")
        if self.begin_line("x") == self.end_line("x"):
            raise FrameError("begin and end markers must be distinguishable")

    def begin_line(self, path: str) -> str:
        return f"{self.comment_prefix} {self.begin_template.format(path=path)}"

    def end_line(self, path: str) -> str:
        return f"{self.comment_prefix} {self.end_template.format(path=path)}"

    def _body_regex(self, template: str) -> str:
        return re.escape(template).replace(re.escape("{path}"), "(?P<path>\\S+)")

    def line_regex(self) -> re.Pattern[str]:
        """Matches marker-shaped lines; group 'esc' holds escape backslashes."""
        prefix = re.escape(self.comment_prefix)
        begin = self._body_regex(self.begin_template)
        end = self._body_regex(self.end_template)
        return re.compile(f"^{prefix} (?P<esc>\\\\*)(?:(?P<begin>{begin})|(?P<end>{end.replace('?P<path>', '?P<endpath>')}))$")


_HEADER_RE = re.compile(r"^frame\s+([A-Za-z][A-Za-z0-9_]*)\s*\(([^)]*)\)\s*<<<([A-Za-z0-9_]+)\s*$")


def _parse_body(frame_name: str, body: str) -> tuple[Segment, ...]:
    segments: list[Segment] = []
    literal: list[str] = []
    i, n = 0, len(body)
    while i < n:
        if body.startswith("<<<<", i):
            literal.append("<<")
            i += 4
            continue
        if body.startswith("<<", i):
            m = NAME_RE.match(body, i + 2)
            if not m or not body.startswith(">>", m.end()):
                raise FrameError(f"frame {frame_name!r}: malformed slot reference near offset {i}")
            if literal:
                segments.append(("lit", "".join(literal)))
                literal = []
            segments.append(("slot", m.group(0)))
            i = m.end() + 2
            continue
        literal.append(body[i])
        i += 1
    if literal:
        segments.append(("lit", "".join(literal)))
    return tuple(segments)


def parse_frames(text: str) -> FrameLibrary:
    """Parse frame definitions. Outside bodies, only comments and blanks."""
    frames: dict[str, Frame] = {}
    lines = text.split("\n")
    i = 0
    while i < len(lines):
        line = lines[i]
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            i += 1
            continue
        m = _HEADER_RE.match(line)
        if not m:
            raise FrameError(f"line {i + 1}: expected frame header, got {line!r}")
        name, slot_src, delimiter = m.groups()
        if name in frames:
            raise FrameError(f"duplicate frame name {name!r}")
        slots: list[str] = []
        for raw in slot_src.split(","):
            s = raw.strip()
            if not s:
                continue
            if not NAME_RE.fullmatch(s):
                raise FrameError(f"frame {name!r}: bad slot name {s!r}")
            if s in slots:
                raise FrameError(f"frame {name!r}: duplicate slot {s!r}")
            slots.append(s)
        body_lines: list[str] = []
        i += 1
        while i < len(lines):
            if lines[i].rstrip("\r") == delimiter:
                break
            body_lines.append(lines[i])
            i += 1
        else:
            raise FrameError(f"frame {name!r}: missing body delimiter {delimiter!r}")
        i += 1
        segments = _parse_body(name, "\n".join(body_lines))
        for kind, value in segments:
            if kind == "slot" and value not in slots:
                raise FrameError(f"frame {name!r}: slot {value!r} referenced but not declared")
        frames[name] = Frame(name, tuple(slots), segments)
    return FrameLibrary(frames)


def serialize_frames(lib: FrameLibrary) -> str:
    """Canonical frame source; parses back to an equal library."""
    chunks: list[str] = []
    for frame in lib.frames.values():
        body = frame.body
        delimiter = "EOF"
        n = 0
        while delimiter in body.split("\n"):
            n += 1
            delimiter = f"EOF{n}"
        chunks.append(f"frame {frame.name} ({', '.join(frame.slots)}) <<<{delimiter}\n{body}\n{delimiter}\n")
    return "\n".join(chunks)


def instantiate(
    lib: FrameLibrary, frame_name: str, fills: Mapping[str, Sequence[Fill]] | None = None
) -> FrameInstance:
    """Build a validated instance.

    Unfilled slots are fine (they expand to nothing).  Adjacent literal
    fills are merged and empty ones dropped so that instances are in the
    canonical form extraction produces.
    """
    frame = lib.frame(frame_name)
    canonical: dict[str, tuple[Fill, ...]] = {}
    for slot, values in (fills or {}).items():
        if slot not in frame.slots:
            raise FrameError(f"frame {frame_name!r} has no slot {slot!r}")
        merged: list[Fill] = []
        for value in values:
            if isinstance(value, str):
                if not value:
                    continue
                if merged and isinstance(merged[-1], str):
                    merged[-1] = merged[-1] + value
                else:
                    merged.append(value)
            elif isinstance(value, FrameInstance):
                merged.append(value)
            else:
                raise FrameError(f"slot {slot!r}: fills must be text or frame instances")
        if merged:
            canonical[slot] = tuple(merged)
    instance = FrameInstance(frame, canonical)
    _check_tree(instance)
    return instance


def _check_tree(instance: FrameInstance) -> None:
    seen: set[int] = set()

    def walk(node: FrameInstance) -> None:
        if id(node) in seen:
            raise FrameError(f"instance of frame {node.frame.name!r} appears twice (cycle or shared node)")
        seen.add(id(node))
        for slot, values in node.fills.items():
            if slot not in node.frame.slots:
                raise FrameError(f"frame {node.frame.name!r} has no slot {slot!r}")
            for value in values:
                if isinstance(value, FrameInstance):
                    walk(value)

    walk(instance)


def _child_path(parent_path: str, slot: str, index: int, frame_name: str) -> str:
    return f"{parent_path}/{slot}[{index}]:{frame_name}"


_PATH_TOKEN_RE = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)\[(\d+)\]:([A-Za-z][A-Za-z0-9_]*)$")


def expand(instance: FrameInstance, markers: MarkerConfig) -> str:
    """Deterministic text for an instance tree, marker lines included."""
    _check_tree(instance)
    pieces: list[tuple[str, str]] = []  # ("marker"|"content", text)

    def emit(node: FrameInstance, path: str, at_start: bool) -> None:
        lead = "" if at_start else "\n"
        pieces.append(("marker", f"{lead}{markers.begin_line(path)}\n"))
        indices: dict[str, int] = {}
        for kind, value in node.frame.segments:
            if kind == "lit":
                pieces.append(("content", value))
                continue
            for fill in node.fills.get(value, ()):
                if isinstance(fill, str):
                    pieces.append(("content", fill))
                else:
                    index = indices.get(value, 0)
                    indices[value] = index + 1
                    emit(fill, _child_path(path, value, index, fill.frame.name), at_start=False)
        pieces.append(("marker", f"\n{markers.end_line(path)}\n"))

    emit(instance, instance.frame.name, at_start=True)

    marker_re = markers.line_regex()

    def escape_chunk(chunk: str) -> str:
        lines = chunk.split("\n")
        out = []
        for line in lines:
            m = marker_re.match(line)
            if m:
                line = f"{markers.comment_prefix} \\{line[len(markers.comment_prefix) + 1:]}"
            out.append(line)
        return "\n".join(out)

    rendered: list[str] = []
    content_buffer: list[str] = []
    for kind, text in pieces:
        if kind == "content":
            content_buffer.append(text)
        else:
            if content_buffer:
                rendered.append(escape_chunk("".join(content_buffer)))
                content_buffer = []
            rendered.append(text)
    if content_buffer:
        rendered.append(escape_chunk("".join(content_buffer)))
    return "".join(rendered)


@dataclass
class _Region:
    path: str
    frame_name: str
    slot: str | None
    index: int
    begin_start: int  # offset of the begin marker line
    inner_start: int = 0
    inner_end: int = 0
    end_finish: int = 0  # offset just past the end marker's newline
    children: list["_Region"] = field(default_factory=list)


def _scan_regions(text: str, markers: MarkerConfig) -> _Region:
    marker_re = markers.line_regex()
    stack: list[_Region] = []
    root: _Region | None = None
    offset = 0
    for line in text.split("\n"):
        m = marker_re.match(line)
        if m and not m.group("esc"):
            if m.group("begin") is not None:
                path = m.group("path")
                token = path.rsplit("/", 1)[-1]
                if "/" in path:
                    parsed = _PATH_TOKEN_RE.match(token)
                    if not parsed:
                        raise ExtractError(f"malformed marker path {path!r}")
                    slot, index, frame_name = parsed.group(1), int(parsed.group(2)), parsed.group(3)
                else:
                    slot, index, frame_name = None, 0, path
                region = _Region(path, frame_name, slot, index, begin_start=offset)
                region.inner_start = offset + len(line) + 1
                if stack:
                    stack[-1].children.append(region)
                elif root is None:
                    root = region
                else:
                    raise ExtractError("multiple top-level frame regions")
                stack.append(region)
            else:
                path = m.group("endpath")
                if not stack:
                    raise ExtractError(f"unbalanced end marker for {path!r}")
                region = stack.pop()
                if region.path != path:
                    raise ExtractError(
                        f"mismatched markers: begin {region.path!r} closed by end {path!r}"
                    )
                # the newline before the end marker line is structural
                region.inner_end = offset - 1
                region.end_finish = offset + len(line) + 1
                if region.inner_end < region.inner_start:
                    raise ExtractError(f"empty or overlapping region {path!r}")
        offset += len(line) + 1
    if stack:
        raise ExtractError(f"missing end marker for {stack[-1].path!r}")
    if root is None:
        raise ExtractError("no frame markers found")
    return root


def extract(text: str, lib: FrameLibrary, markers: MarkerConfig) -> FrameInstance:
    """Rebuild the instance tree from expanded (possibly edited) output."""
    root_region = _scan_regions(text, markers)
    if root_region.begin_start != 0:
        raise ExtractError("content before the opening frame marker")
    if root_region.end_finish > len(text):
        raise ExtractError("missing newline after the closing frame marker")
    if text[root_region.end_finish:]:
        raise ExtractError("content after the closing frame marker")

    marker_re = markers.line_regex()

    def unescape(chunk: str) -> str:
        lines = chunk.split("\n")
        out = []
        for line in lines:
            m = marker_re.match(line)
            if m and m.group("esc"):
                prefix_len = len(markers.comment_prefix) + 1
                out.append(f"{markers.comment_prefix} {line[prefix_len + 1:]}")
            else:
                out.append(line)
        return "\n".join(out)

    def build(region: _Region) -> FrameInstance:
        frame = lib.frame(region.frame_name)
        # level items: literal text interleaved with child regions
        items: list[tuple[str, object]] = []
        cursor = region.inner_start
        for child in region.children:
            if child.slot is None or not child.path.startswith(region.path + "/"):
                raise ExtractError(f"marker {child.path!r} does not nest under {region.path!r}")
            items.append(("text", unescape(text[cursor : child.begin_start - 1])))
            items.append(("child", child))
            cursor = child.end_finish
        items.append(("text", unescape(text[cursor : region.inner_end])))

        fills: dict[str, list[Fill]] = {s: [] for s in frame.slots}
        seen_indices: dict[str, int] = {}
        item_idx = 0
        text_pos = 0

        def current_text() -> str | None:
            if item_idx < len(items) and items[item_idx][0] == "text":
                return items[item_idx][1]  # type: ignore[return-value]
            return None

        segments = list(frame.segments)
        for seg_no, (kind, value) in enumerate(segments):
            if kind == "lit":
                chunk = current_text()
                if chunk is None or not chunk.startswith(value, text_pos):
                    raise ExtractError(
                        f"region {region.path!r}: output does not match frame "
                        f"{frame.name!r} near its fixed text {value[:40]!r}"
                    )
                text_pos += len(value)
                continue
            # slot segment: find the next fixed anchor
            anchor = None
            for later_kind, later_value in segments[seg_no + 1 :]:
                if later_kind == "lit":
                    anchor = later_value
                    break
            collected: list[Fill] = []
            while True:
                chunk = current_text()
                if chunk is not None:
                    if anchor is not None:
                        found = chunk.find(anchor, text_pos)
                    else:
                        found = -1
                    if found != -1:
                        collected.append(chunk[text_pos:found])
                        text_pos = found
                        break
                    collected.append(chunk[text_pos:])
                    item_idx += 1
                    text_pos = 0
                    if item_idx >= len(items):
                        if anchor is not None:
                            raise ExtractError(
                                f"region {region.path!r}: fixed text {anchor[:40]!r} "
                                f"of frame {frame.name!r} not found"
                            )
                        break
                    continue
                if item_idx >= len(items):
                    break
                child = items[item_idx][1]
                assert isinstance(child, _Region)
                if child.slot != value:
                    if anchor is None:
                        raise ExtractError(
                            f"marker {child.path!r} fills slot {child.slot!r} where "
                            f"slot {value!r} content was expected"
                        )
                    break  # belongs to a later slot; stop consuming
                expected = seen_indices.get(value, 0)
                if child.index != expected:
                    raise ExtractError(
                        f"marker {child.path!r}: expected sibling index {expected}"
                    )
                seen_indices[value] = expected + 1
                collected.append(build(child))
                item_idx += 1
            for piece in collected:
                if isinstance(piece, str):
                    if piece:
                        if fills[value] and isinstance(fills[value][-1], str):
                            fills[value][-1] = fills[value][-1] + piece
                        else:
                            fills[value].append(piece)
                else:
                    fills[value].append(piece)
        # everything must be consumed
        chunk = current_text()
        if chunk is not None:
            if text_pos != len(chunk):
                raise ExtractError(
                    f"region {region.path!r}: trailing content does not match frame {frame.name!r}"
                )
            item_idx += 1
        if item_idx < len(items):
            remaining = items[item_idx]
            if remaining[0] == "child":
                raise ExtractError(
                    f"marker {remaining[1].path!r} appears inside fixed text of frame {frame.name!r}"  # type: ignore[union-attr]
                )
            if remaining[1]:
                raise ExtractError(
                    f"region {region.path!r}: trailing content does not match frame {frame.name!r}"
                )
        return FrameInstance(frame, {s: tuple(v) for s, v in fills.items() if v})

    return build(root_region)
