"""Listening-test aggregation (MOS with 95% confidence half-widths), the
per-system report table, and the test-set manifest.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import EmbeddingVector, cosine_similarity, load_embeddings
from .errors import RowError, ValidationError

DIMENSIONS = ("vocal_naturalness", "bite_reproduction", "technique_reproduction", "tone_similarity")
DIMENSION_LABELS = {
    "vocal_naturalness": "Vocal naturalness",
    "bite_reproduction": "Bite reproduction",
    "technique_reproduction": "Technique reproduction",
    "tone_similarity": "Tone similarity",
}
LISTENER_GROUPS = ("ordinary", "professional")
RATING_COLUMNS = ("listener_id", "listener_group", "system", "clip_id", "dimension", "score")
Z_95 = 1.96


@dataclass(frozen=True)
class RatingRecord:
    listener_id: str
    listener_group: str
    system: str
    clip_id: str
    dimension: str
    score: int

    def __post_init__(self):
        if self.listener_group not in LISTENER_GROUPS:
            raise ValidationError(f"listener_group must be one of {LISTENER_GROUPS}, got {self.listener_group!r}")
        if self.dimension not in DIMENSIONS:
            raise ValidationError(f"dimension must be one of {DIMENSIONS}, got {self.dimension!r}")
        if isinstance(self.score, bool) or not isinstance(self.score, (int, np.integer)) or not 1 <= self.score <= 5:
            raise ValidationError(f"score must be an integer 1-5, got {self.score!r}")


def _read_table(path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header and ``(line_number, fields)`` rows; blank and ``#`` lines skipped."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), 1) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValidationError(f"{path}: missing header row")
    delimiter = "\t" if "\t" in lines[0][1] else ","
    parse = lambda ln: [f.strip() for f in next(csv.reader([ln], delimiter=delimiter))]
    return parse(lines[0][1]), [(i, parse(ln)) for i, ln in lines[1:]]


def _check_header(path, header: list[str], expected) -> None:
    missing = [c for c in expected if c not in header]
    if missing:
        raise ValidationError(f"{path}: header lacks column(s) {', '.join(missing)}; expected {','.join(expected)}")


def load_ratings(path) -> list[RatingRecord]:
    header, rows = _read_table(path)
    _check_header(path, header, RATING_COLUMNS)
    records = []
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise RowError(lineno, "*", f"expected {len(header)} fields, got {len(fields)}")
        row = dict(zip(header, fields))
        for name in ("listener_id", "system", "clip_id"):
            if not row[name]:
                raise RowError(lineno, name, "empty value")
        if row["listener_group"] not in LISTENER_GROUPS:
            raise RowError(lineno, "listener_group", f"{row['listener_group']!r} not in {LISTENER_GROUPS}")
        if row["dimension"] not in DIMENSIONS:
            raise RowError(lineno, "dimension", f"unknown dimension {row['dimension']!r}")
        try:
            score = int(row["score"])
        except ValueError:
            raise RowError(lineno, "score", f"{row['score']!r} is not an integer") from None
        if not 1 <= score <= 5:
            raise RowError(lineno, "score", f"{score} outside the 1-5 scale")
        records.append(RatingRecord(
            row["listener_id"], row["listener_group"], row["system"], row["clip_id"], row["dimension"], score,
        ))
    return records


def write_ratings(path, records) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATING_COLUMNS)
    for r in records:
        w.writerow([r.listener_id, r.listener_group, r.system, r.clip_id, r.dimension, r.score])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# -- MOS ---------------------------------------------------------------------


@dataclass(frozen=True)
class MosCell:
    mean: float
    ci_halfwidth: float
    n: int

    @property
    def single_rating(self) -> bool:
        """True when the half-width is 0 only because there was one rating."""
        return self.n == 1

    def format(self) -> str:
        return f"{self.mean:.2f} ± {self.ci_halfwidth:.2f}"


def mos_with_ci(scores) -> MosCell:
    """Mean and normal-approximation 95% half-width ``1.96 * s / sqrt(n)``.

    ``s`` uses the n-1 denominator; a single score gives half-width 0.
    """
    x = np.asarray(list(scores), dtype=np.float64)
    if x.size == 0:
        raise ValidationError("cannot compute MOS of an empty score list")
    mean = float(x.mean())
    if x.size == 1:
        return MosCell(mean, 0.0, 1)
    sd = float(x.std(ddof=1))
    return MosCell(mean, Z_95 * sd / math.sqrt(x.size), int(x.size))


# -- embedding pairs -----------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingPair:
    system: str
    converted: EmbeddingVector
    reference: EmbeddingVector

    @property
    def similarity(self) -> float:
        return cosine_similarity(self.converted, self.reference)


def load_embedding_pairs(listfile) -> list[EmbeddingPair]:
    """Read ``system,converted_path,reference_path`` lines.

    Relative paths resolve against the list file's directory.  Vectors in the
    two files pair up line by line; a reference file with a single vector is
    paired with every converted vector.
    """
    listfile = Path(listfile)
    pairs = []
    for lineno, line in enumerate(listfile.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3 or not all(parts):
            raise RowError(lineno, "*", "expected 'system,converted_embedding_path,reference_embedding_path'")
        system, conv_path, ref_path = parts
        conv = load_embeddings(listfile.parent / conv_path)
        ref = load_embeddings(listfile.parent / ref_path)
        if not conv or not ref:
            raise RowError(lineno, "*", "embedding file holds no vectors")
        if len(ref) == 1:
            ref = ref * len(conv)
        if len(ref) != len(conv):
            raise RowError(lineno, "*", f"{len(conv)} converted vs {len(ref)} reference vectors")
        pairs.extend(EmbeddingPair(system, c, r) for c, r in zip(conv, ref))
    return pairs


def mean_similarity(pairs) -> dict[str, tuple[float, int]]:
    """Per-system ``(mean cosine similarity, pair count)`` in first-seen order."""
    sims: dict[str, list[float]] = {}
    for p in pairs:
        sims.setdefault(p.system, []).append(p.similarity)
    return {s: (float(np.mean(v)), len(v)) for s, v in sims.items()}


# -- report ------------------------------------------------------------------


@dataclass
class ReportRow:
    system: str
    group: str | None
    cells: dict[str, MosCell]
    cos_sim: float | None = None

    @property
    def label(self) -> str:
        return self.system if self.group is None else f"{self.system} ({self.group})"


@dataclass
class MosReport:
    rows: list[ReportRow] = field(default_factory=list)

    def render_text(self) -> str:
        header = ["Approach"] + [DIMENSION_LABELS[d] for d in DIMENSIONS] + ["Cos.Sim"]
        body = [
            [r.label] + [r.cells[d].format() for d in DIMENSIONS]
            + ["-" if r.cos_sim is None else f"{r.cos_sim:.4f}"]
            for r in self.rows
        ]
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        lines = []
        for row in [header] + body:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["system", "group"]
        for d in DIMENSIONS:
            head += [f"{d}_mean", f"{d}_ci95", f"{d}_n"]
        w.writerow(head + ["cos_sim"])
        for r in self.rows:
            out = [r.system, r.group or "all"]
            for d in DIMENSIONS:
                c = r.cells[d]
                out += [f"{c.mean:.6f}", f"{c.ci_halfwidth:.6f}", c.n]
            w.writerow(out + ["" if r.cos_sim is None else f"{r.cos_sim:.6f}"])
        return buf.getvalue()


def aggregate_report(records, systems_order=None, embedding_pairs=None, by_group: bool = False) -> MosReport:
    """Pool every listener's ratings per (system, dimension) and attach Cos.Sim.

    With ``by_group`` each system gets one row per listener group that rated it.
    """
    records = list(records)
    if systems_order is None:
        systems_order = list(dict.fromkeys(r.system for r in records))
    groups = list(LISTENER_GROUPS) if by_group else [None]
    bucket: dict[tuple, list[int]] = {}
    for r in records:
        group = r.listener_group if by_group else None
        bucket.setdefault((r.system, group, r.dimension), []).append(r.score)
    sims = mean_similarity(embedding_pairs or [])
    rated = {(s, g) for s, g, _ in bucket}
    # a group that never rated a system gets no row; a partially rated one is a gap
    rows = [(s, g) for s in systems_order for g in groups if (s, g) in rated or not by_group]
    if by_group:
        rows += [(s, None) for s in systems_order if not any((s, g) in rated for g in groups)]
    gaps = [(s, g, d) for s, g in rows for d in DIMENSIONS if (s, g, d) not in bucket]
    if gaps:
        listed = ", ".join(f"({s}{'' if g is None else '/' + g}, {d})" for s, g, d in gaps)
        raise ValidationError(f"no ratings for (system, dimension) cell(s): {listed}")
    report = MosReport()
    for s, g in rows:
        cells = {d: mos_with_ci(bucket[(s, g, d)]) for d in DIMENSIONS}
        report.rows.append(ReportRow(s, g, cells, sims[s][0] if s in sims else None))
    return report


# -- manifest ----------------------------------------------------------------

MANIFEST_COLUMNS = ("technique", "duration_min", "gender", "number")
GENDERS = ("F", "M", "FM")


@dataclass(frozen=True)
class ManifestEntry:
    technique: str
    duration_min: Decimal
    gender: str
    number: int

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ValidationError(f"gender must be one of {GENDERS}, got {self.gender!r}")
        if self.number < 1:
            raise ValidationError(f"number must be >= 1, got {self.number}")
        if self.duration_min < 0:
            raise ValidationError(f"duration_min must be >= 0, got {self.duration_min}")


@dataclass(frozen=True)
class ManifestTotals:
    techniques: int
    clips: int
    duration_min: Decimal

    def line(self) -> str:
        return f"techniques={self.techniques} clips={self.clips} duration_min={self.duration_min}"


def manifest_totals(entries) -> ManifestTotals:
    entries = list(entries)
    return ManifestTotals(
        len(entries), sum(e.number for e in entries), sum((e.duration_min for e in entries), Decimal(0)),
    )


def load_manifest(path) -> tuple[list[ManifestEntry], ManifestTotals]:
    """Read a comma- or tab-separated manifest; errors carry the file line number."""
    header, rows = _read_table(path)
    _check_header(path, header, MANIFEST_COLUMNS)
    entries: list[ManifestEntry] = []
    seen = set()
    for lineno, fields in rows:
        if len(fields) != len(header):
            raise RowError(lineno, "*", f"expected {len(header)} fields, got {len(fields)}")
        row = dict(zip(header, fields))
        technique = row["technique"]
        if not technique:
            raise RowError(lineno, "technique", "empty value")
        if technique.casefold() in seen:
            raise RowError(lineno, "technique", f"duplicate technique {technique!r}")
        seen.add(technique.casefold())
        try:
            duration = Decimal(row["duration_min"])
        except InvalidOperation:
            raise RowError(lineno, "duration_min", f"{row['duration_min']!r} is not a decimal number of minutes") from None
        if not duration.is_finite() or duration < 0:
            raise RowError(lineno, "duration_min", f"{duration} must be a non-negative number")
        if row["gender"] not in GENDERS:
            raise RowError(lineno, "gender", f"unknown gender code {row['gender']!r}; expected one of {GENDERS}")
        try:
            number = int(row["number"])
        except ValueError:
            raise RowError(lineno, "number", f"{row['number']!r} is not an integer") from None
        if number < 1:
            raise RowError(lineno, "number", f"clip count must be positive, got {number}")
        entries.append(ManifestEntry(technique, duration, row["gender"], number))
    return entries, manifest_totals(entries)


def builtin_manifest_path() -> Path:
    """Path of the packaged test-set manifest fixture."""
    return Path(str(resources.files("svcpost") / "data" / "testset_manifest.csv"))


def select_subset(entries, techniques=None, gender: str | None = None) -> tuple[list[ManifestEntry], ManifestTotals]:
    """Filter by technique names (case-insensitive) and/or exact gender code."""
    wanted = None if not techniques else {t.casefold() for t in techniques}
    if gender is not None and gender not in GENDERS:
        raise ValidationError(f"gender filter must be one of {GENDERS}, got {gender!r}")
    out = [
        e for e in entries
        if (wanted is None or e.technique.casefold() in wanted) and (gender is None or e.gender == gender)
    ]
    return out, manifest_totals(out)


def render_manifest(entries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_COLUMNS)
    for e in entries:
        w.writerow([e.technique, str(e.duration_min), e.gender, e.number])
    return buf.getvalue()
