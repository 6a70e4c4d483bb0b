"""Score forensic tools against an answer key, per qualified 5W1H key.

Each (tool, key) cell gets one verdict: correct (the value matches the
answer), not supported (the tool produced nothing) or incorrect (it produced
something else). Tools rank by correct count, then by fewest incorrect,
then by name.
"""

from __future__ import annotations

import struct
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional, Sequence

from ._util import ByteSource, load_document
from .errors import AnswerKeySyntaxError, EmptyAnswerKey
from .model import Timestamp, TraceObject, value_text


class Verdict(str, Enum):
    CORRECT = "correct"
    NOT_SUPPORTED = "not_supported"
    INCORRECT = "incorrect"

    @property
    def glyph(self) -> str:
        return _GLYPHS[self]


_GLYPHS = {Verdict.CORRECT: "○", Verdict.NOT_SUPPORTED: "△", Verdict.INCORRECT: "×"}

LEGEND = (
    "○ correct: matches the answer key (TP)",
    "△ not supported: tool gave no value (NS)",
    "× incorrect: tool gave a different value (FP)",
)

ENCODINGS = ("utf-8", "utf-16le", "unix-le64", "unix-ms-le64")


def parse_offset(v: Any) -> Optional[int]:
    """``16``, ``"10h"``, ``"0x10"`` -> 16. Bare digit strings are decimal."""
    if v is None:
        return None
    if isinstance(v, bool):
        raise AnswerKeySyntaxError(f"bad offset {v!r}")
    if isinstance(v, int):
        return v
    s = str(v).strip()
    try:
        if s and s[-1] in "hH":
            return int(s[:-1], 16)
        if s.lower().startswith("0x"):
            return int(s, 16)
        return int(s)
    except ValueError:
        raise AnswerKeySyntaxError(f"bad offset {v!r}") from None


def format_location(offset: Optional[int], size: Optional[int]) -> str:
    if offset is None:
        return "-"
    return f"{offset:X}h / {size}"


def normalize(value: str) -> str:
    return unicodedata.normalize("NFC", value.strip())


@dataclass(frozen=True)
class KeyEntry:
    key: str  # qualified, e.g. "who: From"
    value: str
    offset: Optional[int] = None
    size: Optional[int] = None
    encoding: str = "utf-8"


@dataclass(frozen=True)
class AnswerKey:
    artifact: str
    entries: tuple[KeyEntry, ...]

    def keys(self) -> list[str]:
        return [e.key for e in self.entries]


@dataclass(frozen=True)
class ToolValue:
    value: str
    offset: Optional[int] = None
    size: Optional[int] = None


@dataclass(frozen=True)
class ToolOutput:
    tool_name: str
    values: Mapping[str, Optional[ToolValue]] = field(default_factory=dict)


def _pair(where: str, offset, size) -> tuple[Optional[int], Optional[int]]:
    offset = parse_offset(offset)
    if size is not None and (isinstance(size, bool) or not isinstance(size, int)):
        try:
            size = int(str(size))
        except ValueError:
            raise AnswerKeySyntaxError(f"{where}: bad size {size!r}") from None
    if (offset is None) != (size is None):
        raise AnswerKeySyntaxError(f"{where}: offset and size must be given together")
    return offset, size


def answer_key_from_doc(doc: Any) -> AnswerKey:
    if not isinstance(doc, dict) or "entries" not in doc:
        raise AnswerKeySyntaxError("answer key needs 'artifact' and 'entries'")
    entries = []
    seen = set()
    for i, e in enumerate(doc["entries"] or []):
        if not isinstance(e, dict) or "key" not in e or "value" not in e:
            raise AnswerKeySyntaxError(f"entries[{i}]: needs key and value")
        key = str(e["key"])
        if key in seen:
            raise AnswerKeySyntaxError(f"duplicate key {key!r}")
        seen.add(key)
        offset, size = _pair(key, e.get("offset"), e.get("size"))
        enc = str(e.get("encoding") or "utf-8")
        if enc not in ENCODINGS:
            raise AnswerKeySyntaxError(f"{key}: unknown encoding {enc!r}")
        entries.append(KeyEntry(key, str(e["value"]), offset, size, enc))
    return AnswerKey(str(doc.get("artifact", "")), tuple(entries))


def load_answer_key(src: ByteSource) -> AnswerKey:
    try:
        doc = load_document(src)
    except Exception as exc:
        raise AnswerKeySyntaxError(str(exc)) from exc
    return answer_key_from_doc(doc)


def tool_output_from_doc(doc: Any) -> ToolOutput:
    if not isinstance(doc, dict) or "tool" not in doc:
        raise AnswerKeySyntaxError("tool output needs 'tool' and 'values'")
    values: dict[str, Optional[ToolValue]] = {}
    for k, v in (doc.get("values") or {}).items():
        if v is None:
            values[str(k)] = None
        elif isinstance(v, dict):
            offset, size = _pair(str(k), v.get("offset"), v.get("size"))
            values[str(k)] = None if v.get("value") is None else ToolValue(str(v["value"]), offset, size)
        else:
            values[str(k)] = ToolValue(str(v))
    return ToolOutput(str(doc["tool"]), values)


def load_tool_output(src: ByteSource) -> ToolOutput:
    try:
        doc = load_document(src)
    except Exception as exc:
        raise AnswerKeySyntaxError(str(exc)) from exc
    return tool_output_from_doc(doc)


def tool_output_from_trace(tool_name: str, t: TraceObject) -> ToolOutput:
    """Qualified-key view (``"who: From"``) of one normalized trace."""
    values = {}
    for k, a in t.attributes.items():
        if a.domain is None:
            continue
        values[f"{a.domain.value}: {k}"] = ToolValue(value_text(a.value))
    return ToolOutput(tool_name, values)


# --------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class Cell:
    entry: KeyEntry
    produced: Optional[ToolValue]
    verdict: Verdict


@dataclass(frozen=True)
class Tally:
    tp: int = 0
    ns: int = 0
    fp: int = 0

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.tp, self.ns, self.fp)


@dataclass(frozen=True)
class ToolResult:
    tool: str
    cells: tuple[Cell, ...]
    tally: Tally
    extras: tuple[str, ...] = ()

    @property
    def verdicts(self) -> list[Verdict]:
        return [c.verdict for c in self.cells]

    @property
    def glyphs(self) -> str:
        return "".join(v.glyph for v in self.verdicts)


@dataclass(frozen=True)
class OffsetCheck:
    key: str
    status: str  # ok | mismatch | out of range | no offset | unparseable
    detail: str = ""


@dataclass(frozen=True)
class ComparisonReport:
    answer_key: AnswerKey
    results: tuple[ToolResult, ...]
    ranking: tuple[str, ...]
    offset_checks: tuple[OffsetCheck, ...] = ()

    def result(self, tool: str) -> ToolResult:
        for r in self.results:
            if r.tool == tool:
                return r
        raise KeyError(tool)


def judge(expected: str, produced: Optional[ToolValue]) -> Verdict:
    if produced is None:
        return Verdict.NOT_SUPPORTED
    if normalize(produced.value) == normalize(expected):
        return Verdict.CORRECT
    return Verdict.INCORRECT


def compare_tools(key: AnswerKey, outputs: Sequence[ToolOutput], *,
                  artifact: Optional[bytes] = None) -> ComparisonReport:
    """Verdict matrix and ranking; with ``artifact`` bytes, answer offsets are checked too."""
    if not key.entries:
        raise EmptyAnswerKey(f"answer key for {key.artifact!r} has no entries")
    if not outputs:
        raise ValueError("at least one tool output is required")
    wanted = set(key.keys())
    results = []
    for out in outputs:
        cells = tuple(Cell(e, out.values.get(e.key), judge(e.value, out.values.get(e.key)))
                      for e in key.entries)
        counts = {v: sum(c.verdict is v for c in cells) for v in Verdict}
        tally = Tally(counts[Verdict.CORRECT], counts[Verdict.NOT_SUPPORTED],
                      counts[Verdict.INCORRECT])
        extras = tuple(k for k in out.values if k not in wanted)
        results.append(ToolResult(out.tool_name, cells, tally, extras))
    ranking = tuple(r.tool for r in sorted(results, key=lambda r: (-r.tally.tp, r.tally.fp, r.tool)))
    checks = tuple(check_offsets(key, artifact)) if artifact is not None else ()
    return ComparisonReport(key, tuple(results), ranking, checks)


def _encode(entry: KeyEntry) -> bytes:
    if entry.encoding == "utf-8":
        return entry.value.encode("utf-8")
    if entry.encoding == "utf-16le":
        return entry.value.encode("utf-16-le")
    seconds = Timestamp.parse(entry.value).instant().timestamp()
    if entry.encoding == "unix-ms-le64":
        return struct.pack("<q", round(seconds * 1000))
    return struct.pack("<q", round(seconds))


def check_offsets(key: AnswerKey, artifact: bytes) -> list[OffsetCheck]:
    """Strict mode: do the answer values' encoded bytes sit at their offsets?"""
    out = []
    for e in key.entries:
        if e.offset is None:
            out.append(OffsetCheck(e.key, "no offset"))
            continue
        try:
            want = _encode(e)
        except ValueError as exc:
            out.append(OffsetCheck(e.key, "unparseable", str(exc)))
            continue
        end = e.offset + e.size
        if end > len(artifact):
            out.append(OffsetCheck(e.key, "out of range",
                                   f"{format_location(e.offset, e.size)} past {len(artifact)} bytes"))
            continue
        got = artifact[e.offset:end]
        if len(want) != e.size:
            out.append(OffsetCheck(e.key, "mismatch",
                                   f"value encodes to {len(want)} bytes, size is {e.size}"))
        elif got != want:
            out.append(OffsetCheck(e.key, "mismatch", f"found {got.hex()} want {want.hex()}"))
        else:
            out.append(OffsetCheck(e.key, "ok"))
    return out


# --------------------------------------------------------------------------
# rendering


def _table(rows: list[list[str]]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]


def render_matrix(r: ComparisonReport) -> str:
    header = ["Key"]
    for res in r.results:
        header += [f'Output of Tool "{res.tool}"', "Offset/size", "Ans."]
    rows = [header]
    for i, entry in enumerate(r.answer_key.entries):
        row = [entry.key]
        for res in r.results:
            cell = res.cells[i]
            if cell.produced is None:
                row += ["-", "-", cell.verdict.glyph]
            else:
                p = cell.produced
                loc = (format_location(p.offset, p.size) if p.offset is not None
                       else format_location(entry.offset, entry.size))
                row += [p.value, loc, cell.verdict.glyph]
        rows.append(row)

    lines = []
    if r.answer_key.artifact:
        lines.append(f"Artifact: {r.answer_key.artifact}")
    lines += _table(rows)
    lines.append("")
    lines += LEGEND
    lines.append("")
    for res in r.results:
        t = res.tally
        line = f"{res.tool}: TP={t.tp} NS={t.ns} FP={t.fp}"
        if res.extras:
            line += f" (unscored extra keys: {', '.join(res.extras)})"
        lines.append(line)
    lines.append("Ranking: " + " > ".join(r.ranking))
    if r.offset_checks:
        lines.append("")
        lines.append("Offset checks:")
        for c in r.offset_checks:
            lines.append(f"  {c.key}: {c.status}" + (f" ({c.detail})" if c.detail else ""))
    return "\n".join(lines) + "\n"

