"""Bloch-sphere sweeps of the postselection figures of merit.

Every detector placement ``(x_m, z_n)`` prepares (in the point limit) a
definite qubit state, which falls into one pixel of a ``theta x phi`` grid.
Scanning all placements and keeping, per pixel, the placement with the
largest chosen figure yields the maps behind the strategy statistics.

Planes are independent, so they are farmed out to worker processes in
fixed chunks. Per-pixel reduction keeps the highest value and breaks ties
by smaller ``z`` then smaller ``x``; the merge is associative and
commutative, so the map does not depend on worker count or scheduling.
"""

from __future__ import annotations

import csv
import enum
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geometry import OpticalGeometry, slit_amplitudes
from .postselect import (
    degenerate_mask,
    figures_from_overlaps,
    remote_amplitudes,
    window_overlaps,
)
from .povm import PovmSettings, povm_figures, total_probability
from .states import bloch_angles

CHUNK_PLANES = 16
FIGURES = ("P", "F", "Pur")


class Target(str, enum.Enum):
    PROBABILITY = "probability"
    FIDELITY = "fidelity"

    @property
    def column(self) -> int:
        return 0 if self is Target.PROBABILITY else 1


@dataclass(frozen=True)
class BlochGrid:
    """``n_theta x n_phi`` pixels with centres ``theta_i = (i + 1/2) pi / n_theta``."""

    n_theta: int = 300
    n_phi: int = 600

    def __post_init__(self):
        if self.n_theta < 2 or self.n_phi < 1:
            raise DomainError("grid needs at least 2 theta rows and 1 phi column")

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    @property
    def theta(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * math.pi / self.n_theta

    @property
    def phi(self) -> np.ndarray:
        return -math.pi + (np.arange(self.n_phi) + 0.5) * 2 * math.pi / self.n_phi

    def pixel(self, theta, phi):
        """Row and column of each state; the two pole rows collapse onto column 0."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        i = np.clip(np.floor(theta / math.pi * self.n_theta).astype(np.int64), 0, self.n_theta - 1)
        j = np.floor((phi + math.pi) / (2 * math.pi) * self.n_phi).astype(np.int64) % self.n_phi
        pole = (i == 0) | (i == self.n_theta - 1)
        return i, np.where(pole, 0, j)


@dataclass(frozen=True)
class SweepConfig:
    """Scan geometry: window width and x step, z step and grid.

    ``x_half_range`` defaults to the first envelope zero ``pi f / (k a)``.
    """

    width: float = 20e-6
    x_step: float | None = None
    x_half_range: float | None = None
    z_step: float = 100e-6
    grid: BlochGrid = field(default_factory=BlochGrid)

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError("sweep detector width must be positive")
        if not self.z_step > 0:
            raise DomainError("z step must be positive")

    @classmethod
    def preset(cls, name: str, **overrides) -> "SweepConfig":
        steps = {"coarse": 100e-6, "full": 1e-6}
        if name not in steps:
            raise DomainError(f"unknown preset {name!r}; expected one of {sorted(steps)}")
        return cls(z_step=steps[name], **overrides)

    def x_positions(self, geom: OpticalGeometry) -> np.ndarray:
        """Window centres ``+-(m + 1/2) step`` that fit inside the half range."""
        step = self.x_step if self.x_step is not None else self.width
        half = self.x_half_range if self.x_half_range is not None else geom.first_zone_half_width
        n = int(math.floor(half / step + 1e-9))
        if n < 1:
            raise DomainError("x range holds no detector position")
        right = (np.arange(n) + 0.5) * step
        return np.concatenate([-right[::-1], right])

    def z_planes(self, geom: OpticalGeometry) -> np.ndarray:
        f = geom.focal_length
        n = int(round(f / self.z_step))
        return f + f * np.arange(n + 1) / n


@dataclass
class SweepMap:
    """Per-pixel best value, its placement and the figure triple there.

    Unoccupied pixels hold NaN. ``degenerate`` counts skipped placements.
    """

    grid: BlochGrid
    target: Target
    value: np.ndarray
    P: np.ndarray
    F: np.ndarray
    Pur: np.ndarray
    x: np.ndarray
    z: np.ndarray
    degenerate: int = 0
    evaluated: int = 0

    @property
    def occupied(self) -> np.ndarray:
        return np.isfinite(self.value)

    @classmethod
    def empty(cls, grid: BlochGrid, target: Target) -> "SweepMap":
        nan = lambda: np.full((grid.n_theta, grid.n_phi), np.nan)
        return cls(grid, target, nan(), nan(), nan(), nan(), nan(), nan())

    def equals(self, other: "SweepMap") -> bool:
        """Bitwise equality of all arrays (NaN == NaN)."""
        names = ("value", "P", "F", "Pur", "x", "z")
        return self.grid == other.grid and self.target == other.target and all(
            np.array_equal(getattr(self, n), getattr(other, n), equal_nan=True) for n in names
        )


# ---------------------------------------------------------------------------
# plane evaluation


@dataclass
class PlaneBatch:
    """Flat records of all non-degenerate placements in some planes."""

    cell: np.ndarray
    x: np.ndarray
    z: np.ndarray
    figures: np.ndarray  # (n, 3): P, F, Pur
    degenerate: int = 0

    @classmethod
    def concat(cls, batches):
        batches = list(batches)
        if not batches:
            return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0), np.zeros((0, 3)))
        return cls(
            np.concatenate([b.cell for b in batches]),
            np.concatenate([b.x for b in batches]),
            np.concatenate([b.z for b in batches]),
            np.concatenate([b.figures for b in batches]),
            sum(b.degenerate for b in batches),
        )


def evaluate_plane(geom: OpticalGeometry, z: float, xs: np.ndarray, width: float, grid: BlochGrid) -> PlaneBatch:
    """Figures of merit and target pixels of every window centre in plane ``z``."""
    phi = slit_amplitudes(geom, xs, z)
    keep = ~degenerate_mask(geom, phi, z)
    phi = phi[:, keep]
    x = xs[keep]
    values = window_overlaps(geom, x, width, z)
    P, F, Q = figures_from_overlaps(values, phi)
    bob = remote_amplitudes(phi)
    theta, az = bloch_angles(bob[0], bob[1])
    i, j = grid.pixel(theta, az)
    return PlaneBatch(
        cell=i * grid.n_phi + j,
        x=x,
        z=np.full(x.shape, float(z)),
        figures=np.stack([P, F, Q], axis=1),
        degenerate=int(np.count_nonzero(~keep)),
    )


def _reduce(batch: PlaneBatch, column: int) -> PlaneBatch:
    """Keep one record per cell: highest value, then smallest z, then smallest x."""
    if batch.cell.size == 0:
        return batch
    value = batch.figures[:, column]
    value = np.where(np.isnan(value), -np.inf, value)
    order = np.lexsort((batch.x, batch.z, -value, batch.cell))
    cells = batch.cell[order]
    first = np.ones(cells.size, dtype=bool)
    first[1:] = cells[1:] != cells[:-1]
    sel = order[first]
    return PlaneBatch(batch.cell[sel], batch.x[sel], batch.z[sel], batch.figures[sel], batch.degenerate)


def _scan_chunk(args):
    geom, planes, xs, width, grid, columns = args
    batch = PlaneBatch.concat(evaluate_plane(geom, z, xs, width, grid) for z in planes)
    return [_reduce(batch, c) for c in columns], batch.degenerate, int(len(planes) * xs.size)


def _to_map(batch: PlaneBatch, grid: BlochGrid, target: Target, degenerate: int, evaluated: int) -> SweepMap:
    out = SweepMap.empty(grid, target)
    rows, cols = np.divmod(batch.cell, grid.n_phi)
    out.value[rows, cols] = batch.figures[:, target.column]
    out.P[rows, cols] = batch.figures[:, 0]
    out.F[rows, cols] = batch.figures[:, 1]
    out.Pur[rows, cols] = batch.figures[:, 2]
    out.x[rows, cols] = batch.x
    out.z[rows, cols] = batch.z
    # the pole rows represent single states: copy column 0 across
    for r in (0, grid.n_theta - 1):
        for arr in (out.value, out.P, out.F, out.Pur, out.x, out.z):
            arr[r, :] = arr[r, 0]
    out.degenerate = degenerate
    out.evaluated = evaluated
    return out


def run_postselect_sweeps(
    geom: OpticalGeometry,
    cfg: SweepConfig,
    targets=(Target.PROBABILITY, Target.FIDELITY),
    *,
    workers: int = 1,
    planes=None,
    progress=None,
) -> dict:
    """Scan all planes once and build one map per maximization target.

    ``planes`` overrides the config's z grid. ``progress`` is called with
    the number of finished chunks and the total.
    """
    if geom.num_slits != 2:
        raise DomainError("Bloch-sphere sweeps are defined for qubits")
    targets = tuple(Target(t) for t in targets)
    xs = cfg.x_positions(geom)
    zs = cfg.z_planes(geom) if planes is None else np.asarray(planes, dtype=float)
    columns = tuple(t.column for t in targets)
    chunks = [zs[i:i + CHUNK_PLANES] for i in range(0, zs.size, CHUNK_PLANES)]
    jobs = [(geom, c, xs, cfg.width, cfg.grid, columns) for c in chunks]

    partial = [[] for _ in targets]
    degenerate = evaluated = 0

    def collect(result, done):
        nonlocal degenerate, evaluated
        reduced, deg, n = result
        for slot, r in zip(partial, reduced):
            slot.append(r)
        degenerate += deg
        evaluated += n
        if progress is not None:
            progress(done, len(jobs))

    if workers <= 1:
        for done, job in enumerate(jobs, 1):
            collect(_scan_chunk(job), done)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done, result in enumerate(pool.map(_scan_chunk, jobs), 1):
                collect(result, done)

    maps = {}
    for t, slot, c in zip(targets, partial, columns):
        merged = _reduce(PlaneBatch.concat(slot), c)
        maps[t] = _to_map(merged, cfg.grid, t, degenerate, evaluated)
    return maps


def run_postselect_sweep(geom: OpticalGeometry, cfg: SweepConfig, target=Target.PROBABILITY, **kwargs) -> SweepMap:
    return run_postselect_sweeps(geom, cfg, (Target(target),), **kwargs)[Target(target)]


def merge_maps(a: SweepMap, b: SweepMap) -> SweepMap:
    """Per-pixel override merge of two maps for the same target and grid."""
    if a.grid != b.grid or a.target != b.target:
        raise DomainError("maps must share grid and target")

    def records(m):
        occ = np.isfinite(m.value).ravel()
        cells = np.flatnonzero(occ)
        figs = np.stack([m.P.ravel()[occ], m.F.ravel()[occ], m.Pur.ravel()[occ]], axis=1)
        return PlaneBatch(cells, m.x.ravel()[occ], m.z.ravel()[occ], figs)

    merged = _reduce(PlaneBatch.concat([records(a), records(b)]), a.target.column)
    return _to_map(merged, a.grid, a.target, a.degenerate + b.degenerate, a.evaluated + b.evaluated)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class FigureStats:
    mean: float
    min: float
    max: float
    std: float


@dataclass(frozen=True)
class SweepStats:
    P: FigureStats
    F: FigureStats
    Pur: FigureStats
    occupied: int
    unoccupied: int

    def as_dict(self) -> dict:
        out = {}
        for name in FIGURES:
            s = getattr(self, name)
            out[name] = {"mean": s.mean, "min": s.min, "max": s.max, "std": s.std}
        out["occupied"] = self.occupied
        out["unoccupied"] = self.unoccupied
        return out


def _figure_stats(values: np.ndarray) -> FigureStats:
    return FigureStats(float(values.mean()), float(values.min()), float(values.max()), float(values.std()))


def stats(m: SweepMap) -> SweepStats:
    """Population statistics over occupied pixels."""
    occ = m.occupied
    n = int(occ.sum())
    if n == 0:
        raise DomainError("map has no occupied pixels")
    return SweepStats(
        _figure_stats(m.P[occ]),
        _figure_stats(m.F[occ]),
        _figure_stats(m.Pur[occ]),
        n,
        int(occ.size - n),
    )


# ---------------------------------------------------------------------------
# POVM curves and strategy comparison


def run_povm_scan(geom: OpticalGeometry, width: float, n_Theta: int = 100, n_chi: int = 100):
    """Figure triples of the POVM strategy over ``Theta in [0, pi/4]`` and ``chi in [-pi, pi)``.

    Returns ``(Thetas, chis, table)`` with ``table[a, b] = (P_tot, F, Pur)``
    averaged over the four detectors with their click probabilities.
    """
    if n_Theta < 2 or n_chi < 2:
        raise DomainError("POVM scan needs at least 2 points per axis")
    Thetas = np.linspace(0, math.pi / 4, n_Theta)
    chis = -math.pi + 2 * math.pi * np.arange(n_chi) / n_chi
    table = np.empty((n_Theta, n_chi, 3))
    for a, T in enumerate(Thetas):
        for b, c in enumerate(chis):
            fig = povm_figures(PovmSettings(float(T), float(c)), geom, width)
            table[a, b] = (fig.probability, fig.fidelity, fig.purity)
    return Thetas, chis, table


def povm_stats(geom: OpticalGeometry, width: float, n_Theta: int = 100, n_chi: int = 64) -> SweepStats:
    """Population statistics of the POVM strategy over its ``(Theta, chi)`` scan."""
    _, _, table = run_povm_scan(geom, width, n_Theta, n_chi)
    flat = table.reshape(-1, 3)
    return SweepStats(*(_figure_stats(flat[:, k]) for k in range(3)), flat.shape[0], 0)


def povm_probability_map(geom: OpticalGeometry, width: float, grid: BlochGrid) -> np.ndarray:
    """POVM total probability for each pixel-centre state.

    It depends only on ``chi = phi`` through the detector position
    ``x1V = f phi / (k d)``; the pole rows use ``chi = 0``.
    """
    x1V = geom.focal_length / (geom.k * geom.slit_separation) * grid.phi
    row = total_probability(x1V, geom, width)
    out = np.broadcast_to(row, (grid.n_theta, grid.n_phi)).copy()
    pole = total_probability(0.0, geom, width)
    out[0, :] = pole
    out[-1, :] = pole
    return out


@dataclass
class Comparison:
    winner: np.ndarray  # 1 POVM, 0 postselection, -1 unoccupied
    povm_fraction: float


def compare_probability_maps(postselect_map: SweepMap, povm_probabilities: np.ndarray) -> Comparison:
    """Per-pixel winner between the postselection map and the POVM probabilities."""
    povm_probabilities = np.asarray(povm_probabilities)
    if povm_probabilities.shape != postselect_map.value.shape:
        raise DomainError(
            f"grid mismatch: {povm_probabilities.shape} vs {postselect_map.value.shape}"
        )
    occ = postselect_map.occupied
    winner = np.full(occ.shape, -1, dtype=np.int8)
    winner[occ] = (povm_probabilities[occ] > postselect_map.P[occ]).astype(np.int8)
    frac = float(np.count_nonzero(winner == 1) / max(1, np.count_nonzero(occ)))
    return Comparison(winner, frac)


# ---------------------------------------------------------------------------
# export


CSV_COLUMNS = ("theta_index", "phi_index", "theta", "phi", "value", "P", "F", "Pur",
               "x_m", "z_m", "hammer_x", "hammer_y")


def hammer_aitoff(theta, phi):
    """Equal-area map coordinates with latitude ``pi/2 - theta`` and longitude ``phi``."""
    lat = math.pi / 2 - np.asarray(theta, dtype=float)
    lon = np.asarray(phi, dtype=float)
    den = np.sqrt(1 + np.cos(lat) * np.cos(lon / 2))
    return (2 * math.sqrt(2) * np.cos(lat) * np.sin(lon / 2) / den,
            math.sqrt(2) * np.sin(lat) / den)


def _map_rows(m: SweepMap):
    grid = m.grid
    th, ph = np.meshgrid(grid.theta, grid.phi, indexing="ij")
    hx, hy = hammer_aitoff(th, ph)
    ii, jj = np.meshgrid(np.arange(grid.n_theta), np.arange(grid.n_phi), indexing="ij")
    cols = [ii, jj, th, ph, m.value, m.P, m.F, m.Pur, m.x, m.z, hx, hy]
    return [c.ravel() for c in cols]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def export_map(m: SweepMap, path, fmt: str = "csv", *, occupied_only: bool = False) -> None:
    """Write the map row-major as CSV or JSON (floats in round-trip precision).

    ``occupied_only`` drops empty pixels; an empty map then gives a header-only CSV.
    """
    cols = _map_rows(m)
    keep = np.isfinite(cols[4]) if occupied_only else np.ones(cols[0].size, dtype=bool)
    meta = {"n_theta": m.grid.n_theta, "n_phi": m.grid.n_phi, "target": m.target.value,
            "degenerate": m.degenerate, "evaluated": m.evaluated}
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in np.flatnonzero(keep):
                w.writerow([_fmt(c[r]) for c in cols])
    elif fmt == "json":
        data = dict(meta)
        data["columns"] = {
            name: [None if (isinstance(v, float) and math.isnan(v)) else v
                   for v in (c[keep].tolist())]
            for name, c in zip(CSV_COLUMNS, cols)
        }
        with open(path, "w") as fh:
            json.dump(data, fh, sort_keys=True)
    else:
        raise DomainError(f"unknown format {fmt!r}; expected 'csv' or 'json'")


def load_map(path, fmt: str | None = None) -> SweepMap:
    """Read a map written by :func:`export_map`."""
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "csv"
    if fmt == "csv":
        with open(path, newline="") as fh:
            meta = json.loads(fh.readline()[2:])
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        columns = {name: [row[k] for row in rows] for k, name in enumerate(header)}
        columns = {n: np.array(v, dtype=float) for n, v in columns.items()}
    elif fmt == "json":
        with open(path) as fh:
            data = json.load(fh)
        meta = data
        columns = {n: np.array([np.nan if v is None else v for v in vals], dtype=float)
                   for n, vals in data["columns"].items()}
    else:
        raise DomainError(f"unknown format {fmt!r}")
    grid = BlochGrid(int(meta["n_theta"]), int(meta["n_phi"]))
    m = SweepMap.empty(grid, Target(meta["target"]))
    m.degenerate = int(meta["degenerate"])
    m.evaluated = int(meta["evaluated"])
    ii = columns["theta_index"].astype(np.int64)
    jj = columns["phi_index"].astype(np.int64)
    for attr, name in (("value", "value"), ("P", "P"), ("F", "F"), ("Pur", "Pur"),
                       ("x", "x_m"), ("z", "z_m")):
        getattr(m, attr)[ii, jj] = columns[name]
    return m


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
