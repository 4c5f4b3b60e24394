"""Experiment and panel datasets: domain types, CSV ingestion, summary statistics.

Outcomes are stored in raw currency units; consumers apply log(y + 1) lazily.
Purchase status is defined as y > 0 throughout. Datasets are immutable after
construction and safe to share across concurrent readers.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

logger = logging.getLogger(__name__)

_BINARY = (0, 1)


@dataclass(frozen=True)
class ExperimentRecord:
    """One customer in a holdout experiment."""

    customer_id: str
    z: int
    y: float
    covariates: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.z not in _BINARY:
            raise ValidationError(f"treatment flag must be 0 or 1, got {self.z!r}")
        if not np.isfinite(self.y) or self.y < 0:
            raise ValidationError(f"outcome must be finite and >= 0, got {self.y!r}")
        for name, value in self.covariates.items():
            if value not in _BINARY:
                raise ValidationError(f"covariate {name!r} must be 0 or 1, got {value!r}")


@dataclass(frozen=True)
class ExperimentDataset:
    """Validated experiment data backed by read-only columnar arrays.

    ``covariates`` maps flag names to int8 arrays aligned with the other
    columns. Use :meth:`from_records` for row-oriented construction.
    """

    customer_id: np.ndarray
    z: np.ndarray
    y: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = np.asarray(self.customer_id, dtype=object)
        z = np.asarray(self.z, dtype=np.int8)
        y = np.asarray(self.y, dtype=np.float64)
        if not (len(ids) == len(z) == len(y)):
            raise ValidationError("customer_id, z and y must have equal length")
        if z.size and not np.isin(z, _BINARY).all():
            raise ValidationError("treatment flags must all be 0 or 1")
        if y.size and (not np.isfinite(y).all() or (y < 0).any()):
            bad = int(np.flatnonzero(~np.isfinite(y) | (y < 0))[0])
            raise ValidationError(
                f"outcomes must be finite and >= 0; first offender is record {bad} "
                f"(customer {ids[bad]!r}, y={y[bad]!r})"
            )
        if len(set(ids)) != len(ids):
            raise ValidationError("customer_id values must be unique")
        covs = {}
        for name, col in dict(self.covariates).items():
            arr = np.asarray(col, dtype=np.int8)
            if len(arr) != len(ids):
                raise ValidationError(f"covariate {name!r} length does not match records")
            if arr.size and not np.isin(arr, _BINARY).all():
                raise ValidationError(f"covariate {name!r} must be binary")
            arr.setflags(write=False)
            covs[name] = arr
        for arr in (ids, z, y):
            arr.setflags(write=False)
        object.__setattr__(self, "customer_id", ids)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", covs)

    @classmethod
    def from_records(cls, records: Sequence[ExperimentRecord]) -> "ExperimentDataset":
        cov_names = sorted({name for r in records for name in r.covariates})
        for r in records:
            if set(r.covariates) != set(cov_names):
                raise ValidationError(
                    f"customer {r.customer_id!r} is missing covariates "
                    f"{sorted(set(cov_names) - set(r.covariates))}"
                )
        return cls(
            customer_id=np.array([r.customer_id for r in records], dtype=object),
            z=np.array([r.z for r in records], dtype=np.int8),
            y=np.array([r.y for r in records], dtype=np.float64),
            covariates={
                name: np.array([r.covariates[name] for r in records], dtype=np.int8)
                for name in cov_names
            },
        )

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n1(self) -> int:
        return int((self.z == 1).sum())

    @property
    def n0(self) -> int:
        return int((self.z == 0).sum())

    @property
    def records(self) -> list[ExperimentRecord]:
        """Row view of the dataset; materialized on demand."""
        return [
            ExperimentRecord(
                customer_id=self.customer_id[i],
                z=int(self.z[i]),
                y=float(self.y[i]),
                covariates={name: int(col[i]) for name, col in self.covariates.items()},
            )
            for i in range(len(self))
        ]

    def log1p_outcomes(self) -> np.ndarray:
        return np.log1p(self.y)

    def covariate_matrix(self, names: Sequence[str]) -> np.ndarray:
        """Design matrix [1, x1, x2, ...] for the named flags, float64."""
        missing = [n for n in names if n not in self.covariates]
        if missing:
            raise ValidationError(f"dataset has no covariate column(s) {missing}")
        cols = [np.ones(len(self))] + [self.covariates[n].astype(np.float64) for n in names]
        return np.column_stack(cols)


@dataclass(frozen=True)
class ExperimentSummary:
    """Arm-level descriptives: mean log(y+1) and purchase incidence per arm."""

    n1: int
    n0: int
    mean_log1p_treated: float
    mean_log1p_control: float
    incidence_treated: float
    incidence_control: float

    def to_dict(self) -> dict:
        return {
            "n1": self.n1,
            "n0": self.n0,
            "mean_log1p_treated": self.mean_log1p_treated,
            "mean_log1p_control": self.mean_log1p_control,
            "incidence_treated": self.incidence_treated,
            "incidence_control": self.incidence_control,
        }


def summarize(data: ExperimentDataset) -> ExperimentSummary:
    """Arm means of log(y+1) and purchase incidences.

    The difference of the arm means is the frequentist difference-in-means
    point estimate on the log scale.
    """
    treated = data.z == 1
    control = ~treated
    if not treated.any() or not control.any():
        raise ValidationError("summaries need at least one record in each arm")
    ell = data.log1p_outcomes()
    bought = data.y > 0
    return ExperimentSummary(
        n1=data.n1,
        n0=data.n0,
        mean_log1p_treated=float(ell[treated].mean()),
        mean_log1p_control=float(ell[control].mean()),
        incidence_treated=float(bought[treated].mean()),
        incidence_control=float(bought[control].mean()),
    )


# --- CSV ingestion -----------------------------------------------------------

#: Default experiment column mapping; covariate columns are declared explicitly.
DEFAULT_SCHEMA = {"customer_id": "customer_id", "z": "z", "y": "y"}


def _open_reader(path: Path) -> tuple[csv.DictReader, object]:
    handle = open(path, newline="", encoding="utf-8")
    reader = csv.DictReader(handle)
    if reader.fieldnames is None:
        handle.close()
        raise SchemaError(f"{path}: file is empty (no header row)")
    return reader, handle


def load_experiment(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    covariate_columns: Sequence[str] = (),
    clip_negative: bool = False,
) -> ExperimentDataset:
    """Load and validate an experiment CSV.

    ``schema`` maps the logical fields (customer_id, z, y) to column names;
    ``covariate_columns`` lists optional binary flag columns to ingest.
    Rows with y < 0 are rejected unless ``clip_negative`` is set, in which
    case they are mapped to 0 and the count is logged.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such file")
    colmap = dict(DEFAULT_SCHEMA)
    colmap.update(schema or {})
    reader, handle = _open_reader(path)
    try:
        header = set(reader.fieldnames or ())
        needed = [colmap["customer_id"], colmap["z"], colmap["y"], *covariate_columns]
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; found {sorted(header)}")

        ids: list[str] = []
        zs: list[int] = []
        ys: list[float] = []
        covs: dict[str, list[int]] = {c: [] for c in covariate_columns}
        clipped = 0
        for lineno, row in enumerate(reader, start=2):
            ids.append(row[colmap["customer_id"]])
            zs.append(_parse_flag(row[colmap["z"]], "z", path, lineno))
            y = _parse_float(row[colmap["y"]], "y", path, lineno)
            if y < 0:
                if clip_negative:
                    y = 0.0
                    clipped += 1
                else:
                    raise ValidationError(
                        f"{path}:{lineno}: negative outcome y={y} "
                        "(pass clip_negative to map to 0)"
                    )
            ys.append(y)
            for c in covariate_columns:
                covs[c].append(_parse_flag(row[c], c, path, lineno))
    finally:
        handle.close()

    if clipped:
        logger.warning("%s: clipped %d negative outcome(s) to 0", path, clipped)
    seen: set[str] = set()
    for i, cid in enumerate(ids):
        if cid in seen:
            raise ValidationError(f"{path}: duplicate customer_id {cid!r} (record {i})")
        seen.add(cid)
    return ExperimentDataset(
        customer_id=np.array(ids, dtype=object),
        z=np.array(zs, dtype=np.int8),
        y=np.array(ys, dtype=np.float64),
        covariates={c: np.array(v, dtype=np.int8) for c, v in covs.items()},
    )


def save_experiment(data: ExperimentDataset, path: str | Path) -> None:
    """Write a dataset back to CSV; floats use repr so a reload is bit-exact."""
    path = Path(path)
    cov_names = sorted(data.covariates)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["customer_id", "z", "y", *cov_names])
        for i in range(len(data)):
            writer.writerow(
                [data.customer_id[i], int(data.z[i]), repr(float(data.y[i]))]
                + [int(data.covariates[c][i]) for c in cov_names]
            )


def _parse_flag(raw: str | None, name: str, path: Path, lineno: int) -> int:
    if raw is None:
        raise ParseError(f"{path}:{lineno}: row is short a value for {name!r}")
    text = raw.strip()
    if text == "0":
        return 0
    if text == "1":
        return 1
    raise ParseError(f"{path}:{lineno}: {name!r} must be 0 or 1, got {raw!r}")


def _parse_float(raw: str | None, name: str, path: Path, lineno: int) -> float:
    if raw is None:
        raise ParseError(f"{path}:{lineno}: row is short a value for {name!r}")
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: {name!r} is not numeric: {raw!r}") from None
    if not np.isfinite(value):
        raise ParseError(f"{path}:{lineno}: {name!r} is not finite: {raw!r}")
    return value


def _parse_period(raw: str | None, path: Path, lineno: int) -> int:
    if raw is None:
        raise ParseError(f"{path}:{lineno}: row is short a value for 't'")
    try:
        t = int(raw)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: 't' is not an integer: {raw!r}") from None
    if t < 1:
        raise ValidationError(f"{path}:{lineno}: period index must be >= 1, got {t}")
    return t


# --- Panel histories ---------------------------------------------------------


@dataclass(frozen=True)
class PanelRecord:
    """One (customer, period) row of pre-experiment purchase/exposure history."""

    customer_id: str
    t: int
    y: int
    z: int


@dataclass(frozen=True)
class CustomerHistory:
    """Contiguous per-customer history; index 0 is period ``t_first``."""

    t_first: int
    purchases: np.ndarray
    exposures: np.ndarray

    def __post_init__(self) -> None:
        self.purchases.setflags(write=False)
        self.exposures.setflags(write=False)

    def __len__(self) -> int:
        return len(self.purchases)


@dataclass(frozen=True)
class PanelHistory:
    """Per-customer period-ordered histories; T is the most recent period."""

    customers: Mapping[str, CustomerHistory]
    T: int

    def __len__(self) -> int:
        return len(self.customers)


def load_panel(path: str | Path) -> PanelHistory:
    """Load a panel CSV with columns customer_id,t,y,z.

    Periods must be contiguous per customer (gaps are rejected); t = T is the
    most recent pre-experiment period, inferred as the maximum t in the file.
    An empty file yields an empty history with T = 0.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such file")
    reader, handle = _open_reader(path)
    try:
        missing = [c for c in ("customer_id", "t", "y", "z") if c not in (reader.fieldnames or ())]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}")
        rows: dict[str, list[tuple[int, int, int]]] = {}
        seen: set[tuple[str, int]] = set()
        for lineno, row in enumerate(reader, start=2):
            cid = row["customer_id"]
            t = _parse_period(row["t"], path, lineno)
            if (cid, t) in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate period {t} for customer {cid!r}")
            seen.add((cid, t))
            rows.setdefault(cid, []).append(
                (t, _parse_flag(row["y"], "y", path, lineno), _parse_flag(row["z"], "z", path, lineno))
            )
    finally:
        handle.close()

    customers: dict[str, CustomerHistory] = {}
    T = 0
    for cid, triples in rows.items():
        triples.sort()
        ts = [t for t, _, _ in triples]
        if ts[-1] - ts[0] + 1 != len(ts):
            raise ValidationError(f"{path}: customer {cid!r} has a gap in periods {ts[0]}..{ts[-1]}")
        customers[cid] = CustomerHistory(
            t_first=ts[0],
            purchases=np.array([y for _, y, _ in triples], dtype=np.int8),
            exposures=np.array([z for _, _, z in triples], dtype=np.int8),
        )
        T = max(T, ts[-1])
    return PanelHistory(customers=customers, T=T)
