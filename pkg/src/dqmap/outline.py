"""Textbook outline parsing and the fixed-width section ID scheme.

A section ID encodes the position of a section in the book hierarchy as
``SECTION`` followed by ten digits: five two-digit segments, one per level,
with unused trailing levels zero-padded. ``SECTION0104030000`` is section
1.4.3. Shorter digit runs are accepted on input and padded to the canonical
ten digits.

Sections are recovered from ATX headings (``#`` .. ``#####``); numbering is
ordinal by order of appearance under each parent, ignoring any numbers that
happen to appear in heading text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ValidationError

SECTION_PREFIX = "SECTION"
MAX_DEPTH = 5
_CODE_DIGITS = 2 * MAX_DEPTH

LABEL_GENERAL = "general"
LABEL_SPECIFIC = "specific"
LABEL_OTHER = "other"
LABELS = (LABEL_GENERAL, LABEL_SPECIFIC, LABEL_OTHER)

_HEADING_RE = re.compile(r"^ {0,3}(#{1,6})[ \t]+(.*)$")
_FENCE_RE = re.compile(r"^ {0,3}(```|~~~)")


@dataclass(frozen=True, order=True)
class SectionId:
    """Hierarchical section path, e.g. ``SectionId((1, 4, 3))`` for 1.4.3."""

    segments: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValidationError("section path is empty")
        if len(self.segments) > MAX_DEPTH:
            raise ValidationError(
                f"section path {list(self.segments)} is deeper than {MAX_DEPTH} levels"
            )
        for pos, seg in enumerate(self.segments, start=1):
            if not 1 <= seg <= 99:
                raise ValidationError(
                    f"segment {pos} out of range [1, 99]: {seg}"
                )

    @property
    def depth(self) -> int:
        return len(self.segments)

    @property
    def code(self) -> str:
        """Canonical ten-digit code with zero-padded trailing levels."""
        digits = "".join(f"{seg:02d}" for seg in self.segments)
        return SECTION_PREFIX + digits.ljust(_CODE_DIGITS, "0")

    @classmethod
    def parse(cls, code: str) -> "SectionId":
        """Decode a section code; accepts 2..10 digits, pads to canonical form."""
        if not code.startswith(SECTION_PREFIX):
            raise ValidationError(
                f"section code must start with {SECTION_PREFIX!r}: {code!r}"
            )
        digits = code[len(SECTION_PREFIX):]
        if not digits.isdigit():
            raise ValidationError(f"section code has non-digit characters: {code!r}")
        if len(digits) % 2 != 0 or not 2 <= len(digits) <= _CODE_DIGITS:
            raise ValidationError(
                f"section code must carry an even number of digits (2..{_CODE_DIGITS}), "
                f"got {len(digits)}: {code!r}"
            )
        digits = digits.ljust(_CODE_DIGITS, "0")
        parts = [int(digits[i : i + 2]) for i in range(0, _CODE_DIGITS, 2)]
        depth = MAX_DEPTH
        while depth > 0 and parts[depth - 1] == 0:
            depth -= 1
        if depth == 0:
            raise ValidationError(f"section code has no nonzero segment: {code!r}")
        for pos in range(depth):
            if parts[pos] == 0:
                raise ValidationError(
                    f"segment {pos + 1} is zero before nonzero segment {depth}: {code!r}"
                )
        return cls(tuple(parts[:depth]))

    def parent(self) -> "SectionId | None":
        if self.depth == 1:
            return None
        return SectionId(self.segments[:-1])

    def is_parent_of(self, other: "SectionId") -> bool:
        """True iff ``other`` sits exactly one level below this section."""
        return (
            other.depth == self.depth + 1
            and other.segments[: self.depth] == self.segments
        )

    def __str__(self) -> str:
        return self.code


def section_id_codec(value: "str | list[int] | tuple[int, ...]") -> "list[int] | str":
    """Convert a section code to its path, or a path to its canonical code."""
    if isinstance(value, str):
        return list(SectionId.parse(value).segments)
    return SectionId(tuple(value)).code


def section_relationship(a: SectionId, b: SectionId) -> str:
    """Label the ordered pair (a, b).

    ``general`` iff a is the direct parent of b, ``specific`` iff b is the
    direct parent of a, ``other`` for everything else (equal sections,
    grandparents, siblings, unrelated).
    """
    if a.is_parent_of(b):
        return LABEL_GENERAL
    if b.is_parent_of(a):
        return LABEL_SPECIFIC
    return LABEL_OTHER


@dataclass
class SectionNode:
    """One section of the document.

    ``char_span`` covers the heading line plus the text directly under it,
    up to the next heading of any level; descendants are not included, so
    the spans of all sections in an outline are pairwise disjoint.
    ``body_span`` is the same region minus the heading line itself.
    """

    id: SectionId
    title: str
    parent: SectionId | None
    char_span: tuple[int, int]
    body_span: tuple[int, int]
    synthesized: bool = False

    @property
    def depth(self) -> int:
        return self.id.depth


@dataclass
class Outline:
    """Parsed section forest in document order, plus the front-matter span."""

    sections: list[SectionNode]
    front_matter: tuple[int, int]
    warnings: list[str] = field(default_factory=list)

    def by_id(self, section_id: SectionId) -> SectionNode:
        for node in self.sections:
            if node.id == section_id:
                return node
        raise KeyError(section_id.code)

    def children(self, section_id: SectionId) -> list[SectionNode]:
        return [n for n in self.sections if n.parent == section_id]

    def roots(self) -> list[SectionNode]:
        return [n for n in self.sections if n.parent is None]


def _strip_closing_hashes(title: str) -> str:
    return re.sub(r"[ \t]+#+[ \t]*$", "", title).strip()


def _find_headings(markdown: str) -> list[tuple[int, str, int, int]]:
    """Return (level, title, line_start, line_end) for ATX headings.

    Headings inside fenced code blocks are ignored.
    """
    headings: list[tuple[int, str, int, int]] = []
    offset = 0
    in_fence = False
    fence_marker = ""
    for line in markdown.splitlines(keepends=True):
        stripped = line.rstrip("\r\n")
        fence = _FENCE_RE.match(stripped)
        if fence:
            marker = fence.group(1)
            if not in_fence:
                in_fence, fence_marker = True, marker
            elif marker == fence_marker:
                in_fence = False
        elif not in_fence:
            m = _HEADING_RE.match(stripped)
            if m:
                level = len(m.group(1))
                title = _strip_closing_hashes(m.group(2))
                headings.append((level, title, offset, offset + len(line)))
        offset += len(line)
    return headings


def parse_outline(markdown: str) -> Outline:
    """Parse a Markdown document into a section forest.

    Depth jumps (e.g. ``#`` directly to ``###``) synthesize intermediate
    sections with empty titles and zero-length spans, recorded as warnings.
    A document without headings becomes a single implicit root section.
    """
    warnings: list[str] = []
    raw = _find_headings(markdown)
    headings = []
    for level, title, start, end in raw:
        if level > MAX_DEPTH:
            warnings.append(
                f"heading {title!r} at depth {level} exceeds the {MAX_DEPTH}-level "
                "section scheme; kept as body text"
            )
            continue
        headings.append((level, title, start, end))

    if not headings:
        root = SectionNode(
            id=SectionId((1,)),
            title="",
            parent=None,
            char_span=(0, len(markdown)),
            body_span=(0, len(markdown)),
        )
        return Outline(sections=[root], front_matter=(0, 0), warnings=warnings)

    front_matter = (0, headings[0][2])

    # (path, title, heading_start, heading_end, synthesized), in document order
    entries: list[tuple[tuple[int, ...], str, int, int, bool]] = []
    counters: dict[tuple[int, ...], int] = {}
    active: list[int] = []
    for level, title, h_start, h_end in headings:
        if level > len(active) + 1:
            warnings.append(
                f"heading {title!r} jumps from depth {len(active)} to {level}; "
                f"synthesized {level - len(active) - 1} intermediate section(s)"
            )
        base = active[:level - 1]
        while len(base) < level - 1:
            key = tuple(base)
            counters[key] = counters.get(key, 0) + 1
            base = base + [counters[key]]
            entries.append((tuple(base), "", h_start, h_start, True))
        key = tuple(base)
        counters[key] = counters.get(key, 0) + 1
        path = tuple(base) + (counters[key],)
        active = list(path)
        entries.append((path, title, h_start, h_end, False))

    real_starts = [e[2] for e in entries if not e[4]]
    sections: list[SectionNode] = []
    real_seen = 0
    for path, title, h_start, h_end, synthesized in entries:
        if synthesized:
            span_end = h_start
        else:
            real_seen += 1
            span_end = (
                real_starts[real_seen] if real_seen < len(real_starts) else len(markdown)
            )
        sid = SectionId(path)
        sections.append(
            SectionNode(
                id=sid,
                title=title,
                parent=sid.parent(),
                char_span=(h_start, span_end),
                body_span=(h_end, span_end),
                synthesized=synthesized,
            )
        )
    return Outline(sections=sections, front_matter=front_matter, warnings=warnings)
