"""Track datasets: the measured irregularity panel plus exogenous bundle,
time-based splits, sliding windows, and the on-disk directory format.

A dataset directory contains:

    meta                    key = value lines: format_version, positions,
                            inspections, provenance
    dates.csv               t,days
    irregularities.csv      t,channel,p0..p{L-1}   (10 channels per inspection)
    exogenous/maintenance.csv      t,category,p0..   (9 binary categories)
    exogenous/under_structure.csv  channel,p0..      (one row of codes 0..4)
    exogenous/rail_joint.csv       channel,p0..      (4 binary joint channels)
    exogenous/ballast_age.csv      t,p0..
    exogenous/tonnage.csv          t,p0..
    exogenous/rainfall.csv         t,channel,p0..    (4 rainfall channels)
    ground_truth_u.csv             t,side,p0..       (optional, simulator only)

All reals are written with 17 significant digits so a write/read round trip
is bit-exact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import DatasetFormatError, DimensionError
from .exogenous import (JOINT_CHANNELS, MAINTENANCE_CATEGORIES,
                        RAINFALL_CHANNELS, ExogenousBundle)

FORMAT_VERSION = 1

CHANNELS = (
    "vertical_left",
    "vertical_right",
    "lateral_left",
    "lateral_right",
    "gauge",
    "cross_level",
    "twist",
    "vibration_vertical",
    "vibration_lateral",
    "speed",
)
VERTICAL_CHANNELS = (0, 1)
SIDES = ("left", "right")


@dataclass
class TrackDataset:
    """Inspection dates, the (T, 10, L) panel, exogenous data, and optional
    simulator ground truth (T, 2, L)."""

    dates: np.ndarray
    irregularities: np.ndarray
    exogenous: ExogenousBundle
    ground_truth_u: np.ndarray | None = None
    provenance: str = "unspecified"

    @property
    def inspections(self) -> int:
        return self.dates.shape[0]

    @property
    def positions(self) -> int:
        return self.irregularities.shape[2]

    def targets(self) -> np.ndarray:
        """The two vertical-alignment channels, (T, 2, L)."""
        return self.irregularities[:, list(VERTICAL_CHANNELS), :]

    def validate(self):
        T, C, L = self.irregularities.shape
        if C != len(CHANNELS):
            raise DimensionError(f"panel must have {len(CHANNELS)} channels, got {C}")
        if self.dates.shape != (T,):
            raise DimensionError("dates length does not match the panel")
        if np.any(np.diff(self.dates) <= 0):
            raise DatasetFormatError("dates must be strictly increasing")
        if not np.all(np.isfinite(self.irregularities)):
            raise DatasetFormatError("panel contains non-finite entries")
        if self.exogenous.inspections != T or self.exogenous.positions != L:
            raise DimensionError("exogenous bundle shape does not match the panel")
        if self.ground_truth_u is not None and self.ground_truth_u.shape != (T, 2, L):
            raise DimensionError("ground_truth_u must be (T, 2, L)")
        self.exogenous.check()


def split_by_time(dataset: TrackDataset, boundaries) -> tuple[TrackDataset, ...]:
    """Split into train/validation/test at two date cut points.

    A date d goes to train if d < boundaries[0], to validation if
    boundaries[0] <= d < boundaries[1], else to test. All three splits must
    be non-empty.
    """
    b0, b1 = boundaries
    if not b0 < b1:
        raise DatasetFormatError(f"boundaries must be increasing, got {boundaries}")
    dates = dataset.dates
    if not (dates[0] < b0 <= dates[-1]) or not (dates[0] < b1 <= dates[-1]):
        raise DatasetFormatError(
            f"boundaries {boundaries} outside the date range "
            f"[{dates[0]}, {dates[-1]}]")
    i0 = int(np.searchsorted(dates, b0, side="left"))
    i1 = int(np.searchsorted(dates, b1, side="left"))
    if i0 == 0 or i1 == i0 or i1 == dates.shape[0]:
        raise DatasetFormatError(
            f"boundaries {boundaries} leave an empty split "
            f"(sizes {i0}/{i1 - i0}/{dates.shape[0] - i1})")
    parts = []
    for name, lo, hi in (("train", 0, i0), ("val", i0, i1),
                         ("test", i1, dates.shape[0])):
        parts.append(TrackDataset(
            dates=dataset.dates[lo:hi],
            irregularities=dataset.irregularities[lo:hi],
            exogenous=dataset.exogenous.slice_time(lo, hi),
            ground_truth_u=(None if dataset.ground_truth_u is None
                            else dataset.ground_truth_u[lo:hi]),
            provenance=f"{dataset.provenance}/{name}",
        ))
    return tuple(parts)


def split_by_ratio(dataset: TrackDataset, ratios=(0.60, 0.15, 0.25)):
    """Split by inspection-count proportions (default mirrors roughly
    6 yr / 1.5 yr / 2.6 yr of history)."""
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) <= 0:
        raise DatasetFormatError(f"ratios must be three positive values summing"
                                 f" to 1, got {ratios}")
    T = dataset.inspections
    i0 = int(round(ratios[0] * T))
    i1 = int(round((ratios[0] + ratios[1]) * T))
    if not 0 < i0 < i1 < T:
        raise DatasetFormatError(f"ratios {ratios} degenerate for T={T}")
    return split_by_time(dataset, (dataset.dates[i0], dataset.dates[i1]))


@dataclass
class WindowedSet:
    """Sliding windows: input index arrays of length tau paired with the
    target index, all inside one split."""

    tau: int
    starts: np.ndarray  # window w covers [starts[w], starts[w]+tau), target at +tau

    def __len__(self):
        return self.starts.shape[0]

    def inputs(self, w: int) -> np.ndarray:
        return np.arange(self.starts[w], self.starts[w] + self.tau)

    def target(self, w: int) -> int:
        return int(self.starts[w] + self.tau)

    def input_matrix(self) -> np.ndarray:
        """(n_windows, tau) array of input indices."""
        return self.starts[:, None] + np.arange(self.tau)[None, :]


def make_windows(dataset: TrackDataset, tau: int) -> WindowedSet:
    """All stride-1 windows of length tau with an in-split target."""
    if tau < 1:
        raise DatasetFormatError(f"tau must be >= 1, got {tau}")
    T = dataset.inspections
    if T < tau + 1:
        raise DatasetFormatError(
            f"split with {T} inspections is too short for tau={tau}")
    return WindowedSet(tau=tau, starts=np.arange(T - tau))


# ----------------------------------------------------------------------
# on-disk format


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_rows(path, header_cols, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header_cols) + "\n")
        for prefix, values in rows:
            fh.write(",".join(list(prefix) + [_fmt(v) for v in values]) + "\n")


def write_dataset(dataset: TrackDataset, path: str):
    """Write the dataset directory; rewrites deterministically in place."""
    dataset.validate()
    os.makedirs(path, exist_ok=True)
    os.makedirs(os.path.join(path, "exogenous"), exist_ok=True)
    T, _, L = dataset.irregularities.shape
    pcols = [f"p{i}" for i in range(L)]

    with open(os.path.join(path, "meta"), "w", encoding="utf-8") as fh:
        fh.write(f"format_version = {FORMAT_VERSION}\n")
        fh.write(f"positions = {L}\n")
        fh.write(f"inspections = {T}\n")
        fh.write(f"provenance = {dataset.provenance}\n")

    _write_rows(os.path.join(path, "dates.csv"), ["t", "days"],
                [((str(t),), [dataset.dates[t]]) for t in range(T)])

    rows = []
    for t in range(T):
        for c, name in enumerate(CHANNELS):
            rows.append(((str(t), name), dataset.irregularities[t, c]))
    _write_rows(os.path.join(path, "irregularities.csv"),
                ["t", "channel"] + pcols, rows)

    exo = dataset.exogenous
    rows = []
    for t in range(T):
        for c, name in enumerate(MAINTENANCE_CATEGORIES):
            rows.append(((str(t), name), exo.maintenance[t, c]))
    _write_rows(os.path.join(path, "exogenous", "maintenance.csv"),
                ["t", "category"] + pcols, rows)

    _write_rows(os.path.join(path, "exogenous", "under_structure.csv"),
                ["channel"] + pcols,
                [(("structure_code",), exo.under_structure.astype(float))])
    _write_rows(os.path.join(path, "exogenous", "rail_joint.csv"),
                ["channel"] + pcols,
                [((name,), exo.rail_joint[c]) for c, name in enumerate(JOINT_CHANNELS)])
    _write_rows(os.path.join(path, "exogenous", "ballast_age.csv"), ["t"] + pcols,
                [((str(t),), exo.ballast_age[t]) for t in range(T)])
    _write_rows(os.path.join(path, "exogenous", "tonnage.csv"), ["t"] + pcols,
                [((str(t),), exo.tonnage[t]) for t in range(T)])
    rows = []
    for t in range(T):
        for c, name in enumerate(RAINFALL_CHANNELS):
            rows.append(((str(t), name), exo.rainfall[t, c]))
    _write_rows(os.path.join(path, "exogenous", "rainfall.csv"),
                ["t", "channel"] + pcols, rows)

    if dataset.ground_truth_u is not None:
        rows = []
        for t in range(T):
            for s, name in enumerate(SIDES):
                rows.append(((str(t), name), dataset.ground_truth_u[t, s]))
        _write_rows(os.path.join(path, "ground_truth_u.csv"),
                    ["t", "side"] + pcols, rows)


def _read_table(path, key_cols: int, expected_rows: int, L: int) -> list:
    """Parse a csv with key_cols leading string columns and L value columns."""
    fname = os.path.basename(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise DatasetFormatError(f"{fname}: file missing") from None
    if not lines:
        raise DatasetFormatError(f"{fname}: empty file")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != key_cols + L:
            raise DatasetFormatError(
                f"{fname} line {i}: expected {key_cols + L} fields, got {len(parts)}")
        try:
            values = np.array([float(x) for x in parts[key_cols:]])
        except ValueError as exc:
            raise DatasetFormatError(f"{fname} line {i}: {exc}") from None
        rows.append((tuple(parts[:key_cols]), values))
    if len(rows) != expected_rows:
        raise DatasetFormatError(
            f"{fname}: expected {expected_rows} data rows, got {len(rows)}")
    return rows


def read_dataset(path: str) -> TrackDataset:
    """Parse a dataset directory, validating schema and invariants."""
    meta_path = os.path.join(path, "meta")
    try:
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta_lines = fh.read().splitlines()
    except FileNotFoundError:
        raise DatasetFormatError("meta: file missing") from None
    meta = {}
    for i, line in enumerate(meta_lines, start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise DatasetFormatError(f"meta line {i}: expected 'key = value'")
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    for key in ("format_version", "positions", "inspections"):
        if key not in meta:
            raise DatasetFormatError(f"meta: missing field {key!r}")
    if int(meta["format_version"]) != FORMAT_VERSION:
        raise DatasetFormatError(
            f"meta: unsupported format_version {meta['format_version']}")
    L = int(meta["positions"])
    T = int(meta["inspections"])

    rows = _read_table(os.path.join(path, "dates.csv"), 1, T, 1)
    dates = np.array([vals[0] for _, vals in rows])

    rows = _read_table(os.path.join(path, "irregularities.csv"), 2, T * len(CHANNELS), L)
    panel = np.zeros((T, len(CHANNELS), L))
    for i, ((t_str, channel), values) in enumerate(rows, start=2):
        if channel not in CHANNELS:
            raise DatasetFormatError(
                f"irregularities.csv line {i}: unknown channel {channel!r}")
        panel[int(t_str), CHANNELS.index(channel)] = values

    exo_dir = os.path.join(path, "exogenous")
    rows = _read_table(os.path.join(exo_dir, "maintenance.csv"), 2,
                       T * len(MAINTENANCE_CATEGORIES), L)
    maint = np.zeros((T, len(MAINTENANCE_CATEGORIES), L))
    for i, ((t_str, cat), values) in enumerate(rows, start=2):
        if cat not in MAINTENANCE_CATEGORIES:
            raise DatasetFormatError(
                f"maintenance.csv line {i}: unknown category {cat!r}")
        maint[int(t_str), MAINTENANCE_CATEGORIES.index(cat)] = values

    rows = _read_table(os.path.join(exo_dir, "under_structure.csv"), 1, 1, L)
    structure = rows[0][1].astype(np.int64)

    rows = _read_table(os.path.join(exo_dir, "rail_joint.csv"), 1,
                       len(JOINT_CHANNELS), L)
    joints = np.zeros((len(JOINT_CHANNELS), L))
    for (name,), values in rows:
        if name not in JOINT_CHANNELS:
            raise DatasetFormatError(f"rail_joint.csv: unknown channel {name!r}")
        joints[JOINT_CHANNELS.index(name)] = values

    rows = _read_table(os.path.join(exo_dir, "ballast_age.csv"), 1, T, L)
    ballast = np.stack([vals for _, vals in rows])
    rows = _read_table(os.path.join(exo_dir, "tonnage.csv"), 1, T, L)
    tonnage = np.stack([vals for _, vals in rows])

    rows = _read_table(os.path.join(exo_dir, "rainfall.csv"), 2,
                       T * len(RAINFALL_CHANNELS), L)
    rain = np.zeros((T, len(RAINFALL_CHANNELS), L))
    for i, ((t_str, name), values) in enumerate(rows, start=2):
        if name not in RAINFALL_CHANNELS:
            raise DatasetFormatError(f"rainfall.csv line {i}: unknown channel {name!r}")
        rain[int(t_str), RAINFALL_CHANNELS.index(name)] = values

    gt = None
    gt_path = os.path.join(path, "ground_truth_u.csv")
    if os.path.exists(gt_path):
        rows = _read_table(gt_path, 2, T * 2, L)
        gt = np.zeros((T, 2, L))
        for (t_str, side), values in rows:
            if side not in SIDES:
                raise DatasetFormatError(f"ground_truth_u.csv: unknown side {side!r}")
            gt[int(t_str), SIDES.index(side)] = values

    dataset = TrackDataset(
        dates=dates,
        irregularities=panel,
        exogenous=ExogenousBundle(
            maintenance=maint,
            under_structure=structure,
            rail_joint=joints,
            ballast_age=ballast,
            tonnage=tonnage,
            rainfall=rain,
        ),
        ground_truth_u=gt,
        provenance=meta.get("provenance", "unspecified"),
    )
    dataset.validate()
    return dataset
