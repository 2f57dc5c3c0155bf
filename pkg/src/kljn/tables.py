"""Regenerate the published design tables and compare against the fixtures."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .circuit import CableModel, ResistorQuad, full_report, match_parallel_fourth, match_serial_fourth

FLAG_RTOL = 0.01


@dataclass(frozen=True)
class Cell:
    table: str
    row: str
    column: str
    computed: float
    printed: float
    deviation: float  # relative; for printed zeros, |computed| over the row's power scale

    @property
    def flagged(self) -> bool:
        return self.deviation > FLAG_RTOL


def load_fixtures() -> dict:
    text = resources.files("kljn").joinpath("data/published_tables.toml").read_text()
    return tomllib.loads(text)


def _fixture_quad(entry, table: str) -> ResistorQuad:
    ha, lb, la, hb = entry
    if hb == "match-parallel":
        hb = match_parallel_fourth(ha, la, lb)
    return ResistorQuad(ha, lb, la, hb)


def _column_values(name: str, entry: dict, index: int, fixtures: dict) -> dict[str, float]:
    cable = CableModel(**fixtures["cable"])
    u_la, b = fixtures["u_la"], fixtures["bandwidth_b"]
    kind = entry["kind"]
    if kind == "report":
        quad = _fixture_quad(entry["quads"][index], name)
        return full_report(quad, u_la, cable, b)
    if kind == "match-parallel":
        ha, la, lb = entry["inputs"][index]
        quad = ResistorQuad(ha, lb, la, match_parallel_fourth(ha, la, lb))
    elif kind == "match-serial":
        la, hb, ha = entry["inputs"][index]
        quad = ResistorQuad(ha, match_serial_fourth(la, hb, ha), la, hb)
    else:
        raise ValueError(f"unknown table kind {kind!r}")
    return full_report(quad, u_la, cable, b)


def regenerate(fixtures: dict | None = None) -> dict[str, list[Cell]]:
    """Compute every printed cell of every table; keyed by table name."""
    fixtures = load_fixtures() if fixtures is None else fixtures
    out = {}
    for name in sorted(k for k in fixtures if k.startswith("table")):
        entry = fixtures[name]
        cells = []
        for j, column in enumerate(entry["columns"]):
            values = _column_values(name, entry, j, fixtures)
            power_scale = values["U_HL"] * values["I_HL"]
            for row, row_values in entry["cells"].items():
                computed = values[row]
                value = row_values[j]
                if value == 0.0:
                    dev = abs(computed) / power_scale
                else:
                    dev = abs(computed - value) / abs(value)
                cells.append(Cell(name, row, column, computed, value, dev))
        out[name] = cells
    return out


def table_rows(cells: list[Cell]) -> list[list]:
    return [[c.row, c.column, repr(c.computed), repr(c.printed), f"{c.deviation:.3e}",
             int(c.flagged)] for c in cells]


TABLE_HEADER = ["row", "column", "computed", "printed", "deviation", "flagged"]
