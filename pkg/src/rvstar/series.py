"""Simulated or ingested series of space points, with CSV export and import."""

from __future__ import annotations

import csv
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import InvalidParameter, ParseError, ShapeMismatch
from .starspace import StarSpace, space_from_config, to_inline_table

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

SPACE_PREFIX = "# space = "


@dataclass
class SeriesPath:
    """A stretch ``X_0, ..., X_{n-1}`` of points in ``space``.

    ``seed`` records where the randomness came from (``None`` for external
    data) and ``burn_in`` how many warm-up steps were discarded before
    ``X_0``.
    """

    points: np.ndarray
    space: StarSpace
    seed: dict[str, Any] | None = None
    burn_in: int = 0
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1 and self.space.dim == 1:
            pts = pts[:, None]
        self.points = self.space.check_points(pts)
        if self.points.ndim != 2:
            raise ShapeMismatch(f"a series is a 2-d array of points, got shape {self.points.shape}")

    def __len__(self) -> int:
        return self.points.shape[0]

    def moduli(self) -> np.ndarray:
        if "_moduli" not in self.meta:
            self.meta["_moduli"] = np.asarray(self.space.modulus(self.points), dtype=float)
        return self.meta["_moduli"]

    def to_csv(self, target) -> None:
        """Write one row per time step, preceded by the space descriptor line."""
        cols = ",".join(f"x{i}" for i in range(self.space.dim))
        header = SPACE_PREFIX + to_inline_table(self.space.descriptor()) + "\n" + cols
        if isinstance(target, (str, Path)):
            with open(target, "w", newline="") as fh:
                np.savetxt(fh, self.points, fmt="%.17g", delimiter=",", header=header, comments="")
        else:
            np.savetxt(target, self.points, fmt="%.17g", delimiter=",", header=header, comments="")


def parse_space_header(line: str) -> StarSpace:
    if not line.startswith(SPACE_PREFIX):
        raise ParseError("first line must carry the space descriptor", row=0)
    try:
        block = tomllib.loads("space = " + line[len(SPACE_PREFIX):])["space"]
        return space_from_config(block)
    except (tomllib.TOMLDecodeError, InvalidParameter) as exc:
        raise ParseError(f"bad space descriptor: {exc}", row=0) from None


def _locate_bad_row(lines: list[str], first_data: int) -> ParseError:
    reader = csv.reader(io.StringIO("".join(lines[first_data:])))
    for i, row in enumerate(reader, start=1):
        try:
            vals = [float(v) for v in row]
        except ValueError:
            return ParseError(f"non-numeric value in {row!r}", row=i)
        if not np.isfinite(vals).all():
            return ParseError(f"non-finite value in {row!r}", row=i)
    return ParseError("unparseable data")


def ingest(source, space: StarSpace | Mapping[str, Any] | None = None) -> SeriesPath:
    """Read a series from CSV.

    The file may start with a ``# space = {...}`` line; ``space`` overrides
    it.  A column-name line is optional.  Row numbers in errors count data rows
    from 1.

    Raises
    ------
    ParseError
        On non-numeric or non-finite values, naming the offending row.
    ShapeMismatch
        If the column count differs from the space dimension.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    lines = text.splitlines(keepends=True)
    first_data = 0
    header_space = None
    if lines and lines[0].startswith("#"):
        header_space = parse_space_header(lines[0])
        first_data = 1
    if len(lines) > first_data and lines[first_data][:1].isalpha():
        first_data += 1
    if isinstance(space, Mapping):
        space = space_from_config(space)
    space = space or header_space
    if space is None:
        raise ParseError("no space given and the file has no space descriptor")

    body = "".join(lines[first_data:])
    if not body.strip():
        raise ParseError("no data rows")
    try:
        data = np.loadtxt(io.StringIO(body), delimiter=",", dtype=float, ndmin=2)
    except ValueError:
        raise _locate_bad_row(lines, first_data) from None
    bad = np.flatnonzero(~np.isfinite(data).all(axis=1))
    if bad.size:
        raise ParseError("non-finite value", row=int(bad[0]) + 1)
    if data.shape[1] != space.dim:
        raise ShapeMismatch(f"CSV has {data.shape[1]} column(s), space {space.kind} needs {space.dim}")
    return SeriesPath(points=data, space=space)
