"""Force-versus-separation tables and their CSV / JSON forms.

Column names carry units. Values are written with 17 significant digits so a
write/read cycle reproduces every float exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError

# attribute -> column header, in output order
_COLUMNS = {
    "a_nm": "a_nm",
    "force_pn": "force_pN",
    "force_lo_pn": "force_lo_pN",
    "force_hi_pn": "force_hi_pN",
    "err_sys_pn": "err_sys_pN",
    "err_rand_pn": "err_rand_pN",
    "err_tot_pn": "err_tot_pN",
}
_BY_HEADER = {v: k for k, v in _COLUMNS.items()}


@dataclass(frozen=True, eq=False)
class ForceCurve:
    a_nm: np.ndarray
    force_pn: np.ndarray
    force_lo_pn: np.ndarray | None = None
    force_hi_pn: np.ndarray | None = None
    err_sys_pn: np.ndarray | None = None
    err_rand_pn: np.ndarray | None = None  # broadcast of a separation-independent value
    err_tot_pn: np.ndarray | None = None

    def __post_init__(self):
        n = np.asarray(self.a_nm).shape
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            arr = np.asarray(v, dtype=float)
            if arr.ndim == 0:
                arr = np.full(n, float(arr))
            if arr.shape != n:
                raise ConfigError(f"column {f.name} has shape {arr.shape}, expected {n}")
            object.__setattr__(self, f.name, arr)

    def columns(self) -> dict[str, np.ndarray]:
        return {_COLUMNS[f.name]: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    def __len__(self):
        return len(self.a_nm)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_table(columns: dict[str, np.ndarray], path, fmt: str = "csv") -> None:
    """Equal-length numeric columns as CSV or as JSON `{"columns", "data"}`."""
    if fmt == "json":
        doc = {"columns": list(columns), "data": {k: [float(x) for x in v] for k, v in columns.items()}}
        Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        return
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns))
        for row in zip(*columns.values()):
            w.writerow([_fmt(x) for x in row])


def read_table(path) -> dict[str, np.ndarray]:
    """Inverse of :func:`write_table`; the format follows the file suffix."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            doc = json.loads(path.read_text(encoding="utf-8"))
            return {k: np.asarray(doc["data"][k], dtype=float) for k in doc["columns"]}
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header = [h.strip() for h in rows[0]]
        body = [r for r in rows[1:] if r]
        return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}
    except (OSError, json.JSONDecodeError, KeyError, IndexError, ValueError) as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from exc


def write_csv(curve: ForceCurve, path) -> None:
    write_table(curve.columns(), path, "csv")


def write_json(curve: ForceCurve, path) -> None:
    write_table(curve.columns(), path, "json")


def _from_columns(data: dict[str, np.ndarray]) -> ForceCurve:
    unknown = set(data) - set(_BY_HEADER)
    if unknown or "a_nm" not in data or "force_pN" not in data:
        raise ConfigError(f"unexpected force-curve columns {sorted(data)}")
    return ForceCurve(**{_BY_HEADER[k]: np.asarray(v, dtype=float) for k, v in data.items()})


def read_curve(path) -> ForceCurve:
    return _from_columns(read_table(path))


def write_curve(curve: ForceCurve, path, fmt: str = "csv") -> None:
    (write_json if fmt == "json" else write_csv)(curve, path)
