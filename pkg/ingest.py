"""
Per-user data distributions from tabular CSV files.

A user's distribution is the empirical law of one categorical column among the
rows that match a set of equality filters, e.g. Pr(education = · | race = White).
Categories become integer codes through a `CategoryCodec`.

Design & invariants
-------------------
* CSV dialect: comma separated, header row, UTF-8, RFC 4180 quoting. Cells are
  compared after stripping surrounding whitespace.
* Fresh codecs number categories 1, 2, … by first appearance of the target
  value over all rows in file order. A codec loaded from a codes file is
  frozen: an unknown category in a matching row is an IngestError.
* Rows whose target or filter cells are empty are dropped and counted.
* Frequencies are exact fractions until the final float conversion.
"""

from __future__ import annotations

import csv
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

import store
from dist import DiscreteDistribution, SystemConfig, UserSpec
from errors import ConfigError, IngestError

logger = logging.getLogger(__name__)


# =========================
# Codec
# =========================
@dataclass
class CategoryCodec:
    column: str
    codes: Dict[str, int] = field(default_factory=dict)
    frozen: bool = False

    def __post_init__(self) -> None:
        values = list(self.codes.values())
        if len(set(values)) != len(values):
            raise IngestError(f"codes for column {self.column!r} are not injective")

    def encode(self, category: str) -> int:
        code = self.codes.get(category)
        if code is not None:
            return code
        if self.frozen:
            raise IngestError(f"category {category!r} of column {self.column!r} has no code")
        code = max(self.codes.values(), default=0) + 1
        self.codes[category] = code
        return code

    def decode(self, code: int) -> str:
        for category, value in self.codes.items():
            if value == code:
                return category
        raise IngestError(f"code {code} of column {self.column!r} is unassigned")

    def to_dict(self) -> Dict[str, Any]:
        return {"column": self.column, "codes": dict(self.codes)}

    @classmethod
    def load(cls, path: store.PathLike) -> "CategoryCodec":
        payload = store.read_json(path)
        try:
            column = str(payload["column"])
            codes = {str(k): int(v) for k, v in payload["codes"].items()}
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"{path}: codes file needs 'column' and a 'codes' object of integers") from exc
        return cls(column, codes, frozen=True)

    def save(self, path: store.PathLike) -> None:
        store.write_json_atomic(path, self.to_dict())


# =========================
# Query & scan
# =========================
@dataclass(frozen=True)
class ConditionalQuery:
    target: str
    filters: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "filters", tuple((str(c), str(v)) for c, v in self.filters))
        if any(column == self.target for column, _ in self.filters):
            raise IngestError(f"target column {self.target!r} cannot also be a filter")

    @property
    def columns(self) -> List[str]:
        return [self.target] + [column for column, _ in self.filters]


def parse_filters(spec: Union[str, Mapping[str, Any], Sequence, None]) -> Tuple[Tuple[str, str], ...]:
    """Accept `col=val,col=val`, a {col: val} mapping or a list of pairs."""
    if not spec:
        return ()
    if isinstance(spec, Mapping):
        return tuple((str(c), str(v)) for c, v in spec.items())
    if isinstance(spec, str):
        out = []
        for part in spec.split(","):
            column, sep, value = part.partition("=")
            if not sep or not column.strip():
                raise IngestError(f"filter {part!r} is not of the form column=value")
            out.append((column.strip(), value.strip()))
        return tuple(out)
    return tuple((str(c), str(v)) for c, v in spec)


@dataclass(frozen=True)
class ConditionalCounts:
    counts: Dict[int, int]
    matched: int
    dropped: int
    rows: int

    def frequencies(self) -> Dict[int, Fraction]:
        return {code: Fraction(n, self.matched) for code, n in sorted(self.counts.items())}


def _decoded_lines(raw_lines: Iterable[bytes]) -> Iterator[str]:
    for raw in raw_lines:
        yield raw.decode("utf-8")


def scan_conditional(csv_path: store.PathLike, query: ConditionalQuery, codec: CategoryCodec) -> ConditionalCounts:
    counts: Counter = Counter()
    matched = dropped = rows = 0
    with open(csv_path, "rb") as f:
        reader = csv.DictReader(_decoded_lines(f))
        try:
            header = reader.fieldnames
            if not header:
                raise IngestError(f"{csv_path}: empty CSV (no header row)")
            missing = [c for c in query.columns if c not in header]
            if missing:
                raise IngestError(f"{csv_path}: missing column(s) {', '.join(missing)}")

            for row in reader:
                rows += 1
                if None in row or any(v is None for v in row.values()):
                    raise IngestError("row has a different number of fields than the header", line=reader.line_num)
                target = row[query.target].strip()
                if target and not codec.frozen:
                    codec.encode(target)
                cells = [row[c].strip() for c, _ in query.filters]
                if not target or not all(cells):
                    dropped += 1
                    continue
                if all(cell == value.strip() for cell, (_, value) in zip(cells, query.filters)):
                    matched += 1
                    counts[codec.encode(target)] += 1
        except csv.Error as exc:
            raise IngestError(f"unparseable CSV: {exc}", line=reader.line_num) from exc
        except UnicodeDecodeError as exc:
            # the undecodable line was never handed to the reader
            raise IngestError(f"not valid UTF-8: {exc.reason}", line=reader.line_num + 1) from exc

    if dropped:
        logger.warning("%s: dropped %d row(s) with empty target or filter cells", csv_path, dropped)
    if matched == 0:
        raise IngestError(f"{csv_path}: filter {dict(query.filters)!r} matched no rows")
    logger.info("%s: %d of %d rows match %s", csv_path, matched, rows, dict(query.filters))
    return ConditionalCounts(dict(counts), matched, dropped, rows)


def distribution_from_counts(counts: ConditionalCounts) -> DiscreteDistribution:
    freqs = counts.frequencies()
    support = np.array(list(freqs), dtype=np.float64)
    mass = np.array([float(f) for f in freqs.values()])
    return DiscreteDistribution(support, mass)


def extract_conditional(
    csv_path: store.PathLike, query: ConditionalQuery, codec: CategoryCodec
) -> DiscreteDistribution:
    return distribution_from_counts(scan_conditional(csv_path, query, codec))


# =========================
# Config assembly
# =========================
def _resolve(path: str, base_dir: Optional[str]) -> str:
    if base_dir and not os.path.isabs(path):
        return os.path.join(base_dir, path)
    return path


def _distribution_from_source(source: Mapping[str, Any], base_dir: Optional[str]) -> DiscreteDistribution:
    try:
        csv_path, target = source["csv"], source["target"]
    except (KeyError, TypeError) as exc:
        raise ConfigError("a CSV source needs 'csv' and 'target'") from exc
    query = ConditionalQuery(str(target), parse_filters(source.get("filters")))
    codes_path = source.get("codes")
    if codes_path and os.path.exists(_resolve(codes_path, base_dir)):
        codec = CategoryCodec.load(_resolve(codes_path, base_dir))
    else:
        codec = CategoryCodec(str(target))
    return extract_conditional(_resolve(str(csv_path), base_dir), query, codec)


def build_config(specs: Sequence[Mapping[str, Any]], base_dir: Optional[str] = None) -> SystemConfig:
    """Assemble a SystemConfig from entries

        {"id", "presence", "distribution": {...} | "path.json"}
        {"id", "presence", "source": {"csv", "target", "filters", "codes"}}

    Relative paths resolve against `base_dir`. Presence defaults to 1.
    """
    if not specs:
        raise ConfigError("build_config needs at least one user entry")
    users = []
    for entry in specs:
        if not isinstance(entry, Mapping) or "id" not in entry:
            raise ConfigError(f"user entry needs an 'id': {entry!r}")
        if "distribution" in entry:
            raw = entry["distribution"]
            if isinstance(raw, str):
                distribution = store.load_distribution(_resolve(raw, base_dir))
            else:
                distribution = DiscreteDistribution.from_dict(raw)
        elif "source" in entry:
            distribution = _distribution_from_source(entry["source"], base_dir)
        else:
            raise ConfigError(f"user {entry['id']!r} needs 'distribution' or 'source'")
        try:
            presence = float(entry.get("presence", 1.0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"presence of {entry['id']!r} must be a number") from exc
        users.append(UserSpec(str(entry["id"]), presence, distribution))
    return SystemConfig(tuple(users))
