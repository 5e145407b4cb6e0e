"""Categorical datasets: labeled states stored as integer codes."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from bnps.errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VariableMeta:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if len(set(self.states)) != len(self.states):
            raise DataError(f"duplicate state labels in variable {self.name!r}")
        if len(self.states) < 2:
            raise DataError(f"constant column {self.name!r}: cardinality must be >= 2")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def code_of(self, label: str) -> int:
        try:
            return self.states.index(str(label))
        except ValueError:
            raise DataError(f"unknown state {label!r} for variable {self.name!r}") from None


@dataclass(frozen=True)
class CategoricalDataset:
    """An immutable n x p matrix of state codes with per-column metadata.

    ``codes[i, j]`` indexes ``variables[j].states``. ``dropped`` records how
    many raw rows were discarded during ingestion.
    """

    variables: tuple[VariableMeta, ...]
    codes: np.ndarray
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.int64, copy=True)
        if codes.ndim != 2:
            codes = codes.reshape(-1, len(self.variables))
        if codes.shape[1] != len(self.variables):
            raise DataError(
                f"column count {codes.shape[1]} != variable count {len(self.variables)}"
            )
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        if codes.size:
            cards = np.array([v.cardinality for v in self.variables])
            bad = (codes < 0) | (codes >= cards)
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise DataError(
                    f"code {codes[i, j]} out of range for column {names[j]!r} (row {i})"
                )
        codes.setflags(write=False)
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "codes", codes)

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def p(self) -> int:
        return self.codes.shape[1]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def cardinalities(self) -> np.ndarray:
        return np.array([v.cardinality for v in self.variables], dtype=np.int64)

    def index(self, col: int | str) -> int:
        if isinstance(col, (int, np.integer)):
            if not 0 <= col < self.p:
                raise DataError(f"column index {col} out of range")
            return int(col)
        try:
            return self.names.index(col)
        except ValueError:
            raise DataError(f"unknown column {col!r}") from None

    def column(self, col: int | str) -> np.ndarray:
        return self.codes[:, self.index(col)]

    def select(self, cols: Sequence[int | str]) -> "CategoricalDataset":
        idx = [self.index(c) for c in cols]
        if len(set(idx)) != len(idx):
            raise DataError("duplicate column ids in selection")
        return CategoricalDataset(tuple(self.variables[i] for i in idx), self.codes[:, idx])

    def labels(self) -> list[list[str]]:
        """Decode back to the raw state labels."""
        return [
            [self.variables[j].states[c] for j, c in enumerate(row)] for row in self.codes
        ]

    @classmethod
    def from_labels(
        cls,
        names: Sequence[str],
        rows: Iterable[Sequence[str]],
        variables: Sequence[VariableMeta] | None = None,
    ) -> "CategoricalDataset":
        """Encode raw labels. Without ``variables`` the states are the sorted
        distinct labels of each column; with them, labels must be known states."""
        rows = [list(map(str, r)) for r in rows]
        p = len(names)
        for k, r in enumerate(rows):
            if len(r) != p:
                raise DataError(f"ragged row {k + 1}")
        if variables is None:
            variables = []
            for j, name in enumerate(names):
                states = sorted({r[j] for r in rows})
                if len(states) < 2:
                    raise DataError(f"constant column {name!r}")
                variables.append(VariableMeta(name, tuple(states)))
        else:
            by_name = {v.name: v for v in variables}
            try:
                variables = [by_name[nm] for nm in names]
            except KeyError as e:
                raise DataError(f"column {e.args[0]!r} not in schema") from None
        lookup = [{s: k for k, s in enumerate(v.states)} for v in variables]
        codes = np.empty((len(rows), p), dtype=np.int64)
        for i, r in enumerate(rows):
            for j, lab in enumerate(r):
                try:
                    codes[i, j] = lookup[j][lab]
                except KeyError:
                    raise DataError(
                        f"unknown state {lab!r} in column {names[j]!r} (row {i + 1})"
                    ) from None
        return cls(tuple(variables), codes)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.names)
            w.writerows(self.labels())


def ingest_csv(
    path: str | Path,
    header: bool = True,
    na_policy: str = "fail",
    variables: Sequence[VariableMeta] | None = None,
) -> CategoricalDataset:
    """Read a CSV of categorical labels.

    Empty strings are the only missing marker. With ``na_policy="drop_row"``
    rows holding an empty cell are removed and counted in ``dropped``.
    Errors name the physical line number (header is line 1).
    """
    if na_policy not in ("fail", "drop_row"):
        raise ValueError(f"na_policy must be 'fail' or 'drop_row', got {na_policy!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        raw = [r for r in csv.reader(fh)]
    # trailing blank lines are not rows
    while raw and raw[-1] == []:
        raw.pop()
    if not raw or (header and len(raw) == 1):
        raise DataError(f"empty file: {path}")
    if header:
        names, body, first_line = raw[0], raw[1:], 2
    else:
        names = [f"V{j + 1}" for j in range(len(raw[0]))]
        body, first_line = raw, 1
    p = len(names)
    rows = []
    dropped = 0
    for k, r in enumerate(body):
        line = first_line + k
        if len(r) != p:
            raise DataError(f"ragged row {line}")
        if any(c == "" for c in r):
            if na_policy == "fail":
                raise DataError(f"missing value in row {line}")
            dropped += 1
            continue
        rows.append(r)
    if not rows:
        raise DataError(f"no complete rows in {path}")
    if dropped:
        log.info("dropped %d rows with missing values", dropped)
    ds = CategoricalDataset.from_labels(names, rows, variables)
    object.__setattr__(ds, "dropped", dropped)
    return ds


def config_index(codes: np.ndarray, cards: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """Mixed-radix parent-configuration index, last column varying fastest."""
    j = np.zeros(codes.shape[0], dtype=np.int64)
    for c in cols:
        j = j * int(cards[c]) + codes[:, c]
    return j


def column_counts(
    data: CategoricalDataset, child: int | str, parents: Sequence[int | str] = ()
) -> np.ndarray:
    """Contingency counts N[j, k]: parent configuration j, child state k."""
    ci = data.index(child)
    pa = [data.index(p) for p in parents]
    if ci in pa or len(set(pa)) != len(pa):
        raise DataError("duplicate column ids in family")
    cards = data.cardinalities
    r = int(cards[ci])
    q = int(np.prod(cards[pa])) if pa else 1
    j = config_index(data.codes, cards, pa)
    return np.bincount(j * r + data.codes[:, ci], minlength=q * r).reshape(q, r)
