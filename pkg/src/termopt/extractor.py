"""Harvest ``// veriopt:`` rule annotations from source files into rule files.

Sources are scanned as plain text, one line at a time.  Each annotated
file becomes one phase of the emitted rule file.
"""

from __future__ import annotations

import re
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

from .rules import RewriteRule
from .syntax import ParseError, parse_rule

COMMENT = re.compile(r"//\s*veriopt\s*:(.*)$")
_NAME = re.compile(r"\s*(?:unchecked\s+)?([A-Za-z_]\w*)\s*:")


@dataclass(frozen=True)
class ExtractedRule:
    source_file: str
    line: int
    name: str
    raw_text: str
    parsed: RewriteRule | ParseError

    @property
    def ok(self) -> bool:
        return isinstance(self.parsed, RewriteRule)


@dataclass
class FileReport:
    path: str
    phase: str
    rules: list[ExtractedRule] = field(default_factory=list)
    duplicates: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def comments(self) -> int:
        return len(self.rules)

    @property
    def parsed(self) -> int:
        return sum(r.ok for r in self.rules)

    @property
    def failures(self) -> list[ExtractedRule]:
        return [r for r in self.rules if not r.ok]


@dataclass
class ExtractionReport:
    files: list[FileReport] = field(default_factory=list)

    @property
    def files_scanned(self) -> int:
        return len(self.files)

    @property
    def comments_found(self) -> int:
        return sum(f.comments for f in self.files)

    @property
    def rules_parsed(self) -> int:
        return sum(f.parsed for f in self.files)

    @property
    def parse_failures(self) -> list[ExtractedRule]:
        return [r for f in self.files for r in f.failures]

    @property
    def duplicate_names(self) -> list[str]:
        return [d for f in self.files for d in f.duplicates]

    @property
    def errors(self) -> list[str]:
        return [f"{f.path}: {f.error}" for f in self.files if f.error]

    @property
    def rules(self) -> list[ExtractedRule]:
        return [r for f in self.files for r in f.rules]

    def to_json(self) -> dict:
        return {
            "files_scanned": self.files_scanned,
            "comments_found": self.comments_found,
            "rules_parsed": self.rules_parsed,
            "parse_failures": [
                {"file": r.source_file, "line": r.line, "text": r.raw_text, "error": str(r.parsed)}
                for r in self.parse_failures
            ],
            "duplicate_names": self.duplicate_names,
            "errors": self.errors,
            "files": [
                {
                    "path": f.path,
                    "phase": f.phase,
                    "comments": f.comments,
                    "parsed": f.parsed,
                    "failures": len(f.failures),
                    "duplicates": len(f.duplicates),
                    "error": f.error,
                }
                for f in self.files
            ],
        }


def phase_name_for(path: str | Path) -> str:
    """Identifier derived from a file name, e.g. ``ConditionalNode.java`` -> ``ConditionalNode``."""
    stem = Path(path).name.split(".")[0]
    name = re.sub(r"\W", "_", stem) or "Rules"
    return "_" + name if name[0].isdigit() else name


def scan_text(text: str, source: str = "<text>") -> list[ExtractedRule]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        m = COMMENT.search(line)
        if not m:
            continue
        raw = m.group(1).strip()
        nm = _NAME.match(raw)
        try:
            parsed = parse_rule(raw)
        except ParseError as exc:
            parsed = exc
        out.append(ExtractedRule(source, lineno, nm.group(1) if nm else "", raw, parsed))
    return out


def _renamed(raw: str, old: str, new: str) -> str:
    return re.sub(rf"^((?:unchecked\s+)?){re.escape(old)}\b", rf"\g<1>{new}", raw, count=1)


def _emit_phase(name: str, rules: list[ExtractedRule], by_path: dict[str, FileReport]) -> str:
    lines = [f"phase {name} {{"]
    seen: dict[str, int] = {}
    for r in rules:
        where = f"{r.source_file}:{r.line}"
        if not r.ok:
            lines.append(f"  // unparsed ({where}): {r.raw_text}")
            continue
        text = r.raw_text.rstrip(";").rstrip()
        seen[r.name] = seen.get(r.name, 0) + 1
        if seen[r.name] > 1:
            new = f"{r.name}_{seen[r.name]}"
            while new in seen:
                new += "_"
            seen[new] = 1
            by_path[r.source_file].duplicates.append(f"{where}: duplicate rule name {r.name}, emitted as {new}")
            text = _renamed(text, r.name, new)
        lines.append(f"  {text};")
    lines.append("}")
    return "\n".join(lines)


def extract(paths: Iterable[str | Path], phase_name: str | None = None) -> tuple[str, ExtractionReport]:
    """Scan ``paths`` and return the emitted rule file text plus a report."""
    report = ExtractionReport()
    used: set[str] = set()
    for p in sorted(map(str, paths)):
        name = phase_name or phase_name_for(p)
        if phase_name is None:
            base, k = name, 2
            while name in used:
                name, k = f"{base}_{k}", k + 1
            used.add(name)
        fr = FileReport(p, name)
        try:
            text = Path(p).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            fr.error = str(exc)
        else:
            fr.rules = scan_text(text, p)
        report.files.append(fr)

    by_path = {f.path: f for f in report.files}
    blocks = []
    if phase_name is not None:
        if report.files:
            blocks.append(_emit_phase(phase_name, report.rules, by_path))
    else:
        for f in report.files:
            if not f.error:
                blocks.append(_emit_phase(f.phase, f.rules, by_path))
    return "\n\n".join(blocks) + ("\n" if blocks else ""), report


def _plural(n: int, word: str) -> str:
    return f"{n} {word}" if n == 1 else f"{n} {word}s"


def stats(report: ExtractionReport) -> str:
    header = ("file", "comments", "parsed", "failures", "duplicates")
    rows = [
        (f.path + (f"  [error: {f.error}]" if f.error else ""), f.comments, f.parsed, len(f.failures), len(f.duplicates))
        for f in report.files
    ]
    total = (
        "total",
        report.comments_found,
        report.rules_parsed,
        len(report.parse_failures),
        len(report.duplicate_names),
    )
    width = max(len(str(r[0])) for r in [header, *rows, total])
    fmt = "{:<%d}  {:>8}  {:>6}  {:>8}  {:>10}" % width
    lines = [fmt.format(*header)] + [fmt.format(*r) for r in rows] + [fmt.format(*total)]
    lines.append(
        f"{_plural(report.files_scanned, 'file')}, {_plural(report.comments_found, 'comment')}, "
        f"{report.rules_parsed} parsed, {_plural(len(report.parse_failures), 'failure')}, "
        f"{_plural(len(report.duplicate_names), 'duplicate name')}"
    )
    return "\n".join(lines) + "\n"
