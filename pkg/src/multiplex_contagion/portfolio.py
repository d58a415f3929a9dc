"""Institutions, layered exposure tables and their CSV ingestion.

Amounts are held as fixed-point ``Decimal`` values; conversion to floats
happens only once matrices are assembled.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

LAYERS = ("FI", "SF", "D")
BASES = ("EAD", "NAC", "MtM_gross", "Notional_gross")
LAYER_BASES = {
    "FI": ("MtM_gross",),
    "SF": ("Notional_gross",),
    "D": ("EAD", "NAC"),
}
DEFAULT_SCALE = 2


class PortfolioError(Exception):
    """Base class for ingestion problems; carries file/line context."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = Path(self.path).name
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ParseError(PortfolioError):
    pass


class ValidationError(PortfolioError):
    pass


def quantize(value: Decimal | str | int | float, scale: int = DEFAULT_SCALE) -> Decimal:
    exp = Decimal(1).scaleb(-scale)
    return Decimal(str(value)).quantize(exp, rounding=ROUND_HALF_EVEN)


@dataclass(frozen=True)
class InstitutionRecord:
    id: str
    own_funds: Decimal
    min_capital: Decimal

    def __post_init__(self):
        if not self.id:
            raise ValidationError("institution id must be non-empty")
        if self.own_funds <= 0:
            raise ValidationError(f"institution {self.id!r}: own_funds must be positive")
        if self.min_capital < 0:
            raise ValidationError(f"institution {self.id!r}: min_capital must be non-negative")
        if self.min_capital >= self.own_funds:
            raise ValidationError(
                f"institution {self.id!r}: min_capital {self.min_capital} >= own_funds {self.own_funds}"
            )

    @property
    def available_funds(self) -> Decimal:
        return self.own_funds - self.min_capital

    @property
    def p(self) -> float:
        """Share of own funds usable against triggered exposures."""
        return float(self.available_funds / self.own_funds)


@dataclass(frozen=True)
class LayerExposures:
    """Directed exposures ``(reporter, counterparty) -> amount`` of one layer/basis."""

    layer: str
    basis: str
    entries: Mapping[tuple[str, str], Decimal] = field(default_factory=dict)

    def __post_init__(self):
        if self.layer not in LAYERS:
            raise ValidationError(f"unknown layer {self.layer!r}")
        if self.basis not in LAYER_BASES[self.layer]:
            raise ValidationError(f"basis {self.basis!r} is not valid for layer {self.layer}")
        for (rep, cpty), amount in self.entries.items():
            if rep == cpty:
                raise ValidationError(f"self-exposure of {rep!r} in {self.layer}/{self.basis}")
            if amount < 0:
                raise ValidationError(f"negative amount {amount} for ({rep}, {cpty})")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    @property
    def key(self) -> tuple[str, str]:
        return (self.layer, self.basis)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        if not isinstance(other, LayerExposures):
            return NotImplemented
        return self.key == other.key and dict(self.entries) == dict(other.entries)

    def __hash__(self):
        return hash((self.key, frozenset(self.entries.items())))


@dataclass(frozen=True)
class Portfolio:
    institutions: tuple[InstitutionRecord, ...]
    exposures: Mapping[tuple[str, str], LayerExposures]
    period_tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "institutions", tuple(self.institutions))
        ids = [inst.id for inst in self.institutions]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate institution ids: {', '.join(dup)}")
        known = set(ids)
        tables = {}
        for key, table in dict(self.exposures).items():
            if key != table.key:
                raise ValidationError(f"exposure table keyed {key} holds {table.key}")
            for rep, cpty in table.entries:
                for who in (rep, cpty):
                    if who not in known:
                        raise ValidationError(f"unknown institution id {who!r} in {table.layer}/{table.basis}")
            tables[key] = table
        object.__setattr__(self, "exposures", MappingProxyType(tables))
        object.__setattr__(self, "_index", MappingProxyType({i: k for k, i in enumerate(ids)}))

    @property
    def n(self) -> int:
        return len(self.institutions)

    @property
    def ids(self) -> list[str]:
        return [inst.id for inst in self.institutions]

    def index_of(self, inst_id: str) -> int:
        return self._index[inst_id]

    def table(self, layer: str, basis: str) -> LayerExposures:
        """Exposure table for ``(layer, basis)``; missing tables read as empty."""
        if basis not in LAYER_BASES.get(layer, ()):
            raise ValidationError(f"basis {basis!r} is not valid for layer {layer!r}")
        return self.exposures.get((layer, basis)) or LayerExposures(layer, basis, {})

    def has_table(self, layer: str, basis: str) -> bool:
        return (layer, basis) in self.exposures

    def __eq__(self, other):
        if not isinstance(other, Portfolio):
            return NotImplemented
        return (
            self.institutions == other.institutions
            and dict(self.exposures) == dict(other.exposures)
            and self.period_tag == other.period_tag
        )

    def __hash__(self):
        return hash((self.institutions, tuple(sorted(self.exposures))))


def _parse_amount(raw: str, path, line: int, scale: int) -> Decimal:
    text = raw.strip()
    if not text or "," in text or "_" in text:
        raise ParseError(f"malformed amount {raw!r}", path, line)
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise ParseError(f"malformed amount {raw!r}", path, line) from None
    if not value.is_finite():
        raise ParseError(f"non-finite amount {raw!r}", path, line)
    return quantize(value, scale)


def _read_rows(path: Path, header: Sequence[str],
               allow_empty: bool = False) -> Iterable[tuple[int, list[str]]]:
    if not path.exists():
        raise ParseError("file not found", path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            if allow_empty:
                return
            raise ParseError("empty file, header expected", path, 1) from None
        if [h.strip() for h in first] != list(header):
            raise ParseError(f"expected header {','.join(header)!r}, got {','.join(first)!r}", path, 1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, line)
            yield line, [c.strip() for c in row]


def read_institutions(path: str | Path, scale: int = DEFAULT_SCALE) -> list[InstitutionRecord]:
    path = Path(path)
    out = []
    for line, (inst_id, c, mc) in _read_rows(path, ("id", "own_funds", "min_capital")):
        if not inst_id:
            raise ParseError("empty institution id", path, line)
        try:
            out.append(InstitutionRecord(inst_id, _parse_amount(c, path, line, scale),
                                         _parse_amount(mc, path, line, scale)))
        except ValidationError as exc:
            raise ValidationError(str(exc), path, line) from None
    return out


def read_exposures(path: str | Path, layer: str, basis: str, known_ids: set[str],
                   scale: int = DEFAULT_SCALE) -> LayerExposures:
    path = Path(path)
    entries: dict[tuple[str, str], Decimal] = {}
    for line, (rep, cpty, amount) in _read_rows(path, ("reporter_id", "counterparty_id", "amount"),
                                                  allow_empty=True):
        value = _parse_amount(amount, path, line, scale)
        for who in (rep, cpty):
            if who not in known_ids:
                raise ValidationError(f"unknown institution id {who!r}", path, line)
        if rep == cpty:
            raise ValidationError(f"self-exposure of {rep!r}", path, line)
        if value < 0:
            raise ValidationError(f"negative amount {value}", path, line)
        if (rep, cpty) in entries:
            raise ValidationError(f"duplicate exposure ({rep}, {cpty})", path, line)
        entries[(rep, cpty)] = value
    try:
        return LayerExposures(layer, basis, entries)
    except ValidationError as exc:
        raise ValidationError(str(exc), path) from None


def load_portfolio(institutions_file: str | Path,
                   exposure_files: Iterable[tuple[str, str, str | Path]],
                   period_tag: str = "",
                   scale: int = DEFAULT_SCALE) -> Portfolio:
    """Read and validate a portfolio.

    ``exposure_files`` holds ``(layer, basis, path)`` triples. Institution
    order in the file fixes the matrix index order.
    """
    institutions = read_institutions(institutions_file, scale)
    ids = {inst.id for inst in institutions}
    if len(ids) != len(institutions):
        raise ValidationError("duplicate institution ids", institutions_file)
    tables = {}
    for layer, basis, path in exposure_files:
        if layer not in LAYERS or basis not in LAYER_BASES[layer]:
            raise ValidationError(f"invalid layer/basis combination {layer}/{basis}", path)
        if (layer, basis) in tables:
            raise ValidationError(f"exposure table {layer}/{basis} given twice", path)
        tables[(layer, basis)] = read_exposures(path, layer, basis, ids, scale)
    return Portfolio(tuple(institutions), tables, period_tag)


def exposure_filename(layer: str, basis: str) -> str:
    return f"exposures_{layer}_{basis}.csv"


def discover_exposure_files(directory: str | Path) -> list[tuple[str, str, Path]]:
    """Find ``exposures_<layer>_<basis>.csv`` files in a directory."""
    directory = Path(directory)
    found = []
    for layer in LAYERS:
        for basis in LAYER_BASES[layer]:
            path = directory / exposure_filename(layer, basis)
            if path.exists():
                found.append((layer, basis, path))
    return found


def load_portfolio_dir(directory: str | Path, period_tag: str = "",
                       scale: int = DEFAULT_SCALE) -> Portfolio:
    directory = Path(directory)
    return load_portfolio(directory / "institutions.csv", discover_exposure_files(directory),
                          period_tag, scale)


def save_portfolio(portfolio: Portfolio, directory: str | Path) -> list[Path]:
    """Write the CSV files ``load_portfolio_dir`` reads back."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    path = directory / "institutions.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "own_funds", "min_capital"])
        for inst in portfolio.institutions:
            w.writerow([inst.id, str(inst.own_funds), str(inst.min_capital)])
    written.append(path)
    order = {inst_id: k for k, inst_id in enumerate(portfolio.ids)}
    for layer in LAYERS:
        for basis in LAYER_BASES[layer]:
            if not portfolio.has_table(layer, basis):
                continue
            table = portfolio.table(layer, basis)
            path = directory / exposure_filename(layer, basis)
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["reporter_id", "counterparty_id", "amount"])
                for (rep, cpty) in sorted(table.entries, key=lambda k: (order[k[0]], order[k[1]])):
                    w.writerow([rep, cpty, str(table.entries[(rep, cpty)])])
            written.append(path)
    return written


def apply_reporting_threshold(portfolio: Portfolio, threshold: Decimal | float | str) -> Portfolio:
    """Drop exposures strictly below ``threshold``."""
    threshold = Decimal(str(threshold))
    if threshold < 0:
        raise ValueError("reporting threshold must be non-negative")
    tables = {
        key: LayerExposures(t.layer, t.basis, {k: v for k, v in t.entries.items() if v >= threshold})
        for key, t in portfolio.exposures.items()
    }
    return Portfolio(portfolio.institutions, tables, portfolio.period_tag)
