"""Uniform evaluation grids and grid-backed functions for the joint law.

The joint law of (sum, max) of n nonnegative variables lives on the wedge
z <= y <= n*z. Grid values outside the wedge are exact zeros for densities and
follow the degeneracy identities for distribution functions. The 1-D helpers
here integrate grid columns or rows against that support: partial cells at the
support edge are closed with a linear extrapolation from the two nearest inside
nodes instead of assuming the function drops to zero mid-cell, which keeps the
composite rule second order at jump edges.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import GridError
from .models import support_quantile

__all__ = [
    "GridSpec",
    "GridFunction2D",
    "default_grid_spec",
    "wedge_row_bounds",
    "line_integral",
    "line_cumulative",
    "extend_across_wedge",
]

_SPEC_VERSION = "summax-grid-1"


@dataclass(frozen=True)
class GridSpec:
    """A rectangle [0, y_max] x [0, z_max] sampled on n_y x n_z uniform nodes."""

    y_max: float
    z_max: float
    n_y: int = 512
    n_z: int = 512

    def __post_init__(self):
        ok = (math.isfinite(self.y_max) and math.isfinite(self.z_max)
              and self.y_max > 0 and self.z_max > 0)
        if not ok:
            raise GridError("grid extents must be finite and positive")
        if self.y_max < self.z_max:
            raise GridError("y_max must be at least z_max (the max never exceeds the sum)")
        if self.n_y < 16 or self.n_z < 16:
            raise GridError("grids need at least 16 nodes per axis")

    @property
    def h_y(self) -> float:
        return self.y_max / (self.n_y - 1)

    @property
    def h_z(self) -> float:
        return self.z_max / (self.n_z - 1)

    def y_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.y_max, self.n_y)

    def z_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.z_max, self.n_z)


def default_grid_spec(models, epsilon: float = 1e-6, n_y: int = 512, n_z: int = 512) -> GridSpec:
    """Extents that keep the mass outside the rectangle below roughly epsilon.

    Each variable contributes its upper quantile at level epsilon/n; the sum
    axis uses their total, the max axis their largest. The grid describes the
    common-shift base law: variables whose shift is below the largest one are
    right-translated by the difference, so their extent grows accordingly.
    """
    if not models:
        raise GridError("default_grid_spec needs at least one model")
    c = max(float(getattr(m, "shift", 0.0)) for m in models)
    quants = []
    for m in models:
        # support_quantile already subtracts the model's own shift, so adding
        # the common shift c gives the extent of the right-translated base law.
        q = support_quantile(m, epsilon / len(models))
        quants.append(q + c)
    return GridSpec(y_max=float(sum(quants)), z_max=float(max(quants)), n_y=n_y, n_z=n_z)


def wedge_row_bounds(spec: GridSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive row index range [lo_j, hi_j] of the wedge z <= y <= n*z per column.

    Boundary nodes are kept: indices snap outward by a relative 1e-9 so nodes
    that land on an edge up to roundoff stay inside. A column whose range is
    empty gets lo_j > hi_j.
    """
    z = spec.z_nodes()
    tol = 1e-9 * (1.0 + n * z)
    lo = np.ceil((z - tol) / spec.h_y).astype(np.int64)
    hi = np.floor((n * z + tol) / spec.h_y).astype(np.int64)
    np.clip(lo, 0, spec.n_y - 1, out=lo)
    np.clip(hi, -1, spec.n_y - 1, out=hi)
    return lo, hi


@dataclass(eq=False)
class GridFunction2D:
    """Values of a joint CDF or density on a GridSpec, indexed [i_y, i_z]."""

    spec: GridSpec
    kind: str  # "cdf" or "pdf"
    n: int
    model_fingerprint: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in ("cdf", "pdf"):
            raise GridError(f"unknown grid kind {self.kind!r}")
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.shape != (self.spec.n_y, self.spec.n_z):
            raise GridError("grid values must have shape (n_y, n_z)")
        self.values = vals

    def eval(self, y, z, clamp: bool = False):
        """Bilinear interpolation at (y, z). Negative coordinates give 0.

        Queries beyond the rectangle raise unless ``clamp`` is set, in which
        case the edge value is used (appropriate for distribution functions).
        """
        ya = np.asarray(y, dtype=np.float64)
        za = np.asarray(z, dtype=np.float64)
        scalar = ya.ndim == 0 and za.ndim == 0
        ya, za = np.broadcast_arrays(np.atleast_1d(ya), np.atleast_1d(za))
        spec = self.spec
        if not clamp:
            over = (ya > spec.y_max * (1 + 1e-12) + 1e-300) | (za > spec.z_max * (1 + 1e-12))
            if np.any(over):
                raise GridError("query point outside the grid rectangle")
        yc = np.clip(ya, 0.0, spec.y_max)
        zc = np.clip(za, 0.0, spec.z_max)
        py = yc / spec.h_y
        pz = zc / spec.h_z
        iy = np.minimum(py.astype(np.int64), spec.n_y - 2)
        iz = np.minimum(pz.astype(np.int64), spec.n_z - 2)
        fy = py - iy
        fz = pz - iz
        v = self.values
        out = ((1 - fy) * (1 - fz) * v[iy, iz] + fy * (1 - fz) * v[iy + 1, iz]
               + (1 - fy) * fz * v[iy, iz + 1] + fy * fz * v[iy + 1, iz + 1])
        out = np.where((ya < 0.0) | (za < 0.0), 0.0, out)
        return float(out[0]) if scalar else out.reshape(np.broadcast_shapes(np.shape(y), np.shape(z)))

    def to_json_dict(self) -> dict:
        return {
            "spec": {"y_max": self.spec.y_max, "z_max": self.spec.z_max,
                     "n_y": self.spec.n_y, "n_z": self.spec.n_z,
                     "format": _SPEC_VERSION},
            "kind": self.kind,
            "n": self.n,
            "model_fingerprint": self.model_fingerprint,
            "values": [float(v) for v in self.values.ravel(order="C")],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True)

    def to_csv(self, path) -> None:
        """Long format: one (y, z, value) row per node, y-major order."""
        ys = self.spec.y_nodes()
        zs = self.spec.z_nodes()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y", "z", "value"])
            for i, yv in enumerate(ys):
                row = self.values[i]
                for j, zv in enumerate(zs):
                    writer.writerow([f"{yv:.17g}", f"{zv:.17g}", f"{row[j]:.17g}"])


def _edge_value(vals: np.ndarray, h: float, p: float, ga: int, gb: int) -> float:
    """Linear value at coordinate p from the nearest genuine cell [ga, gb]."""
    if gb <= ga:
        return max(0.0, float(vals[ga]))
    j = int(p / h)
    j = min(max(j, ga), gb - 1)
    t = p / h - j
    return max(0.0, float(vals[j] + (vals[j + 1] - vals[j]) * t))


def line_integral(coords: np.ndarray, vals: np.ndarray, a: float, b: float,
                  support_lo: float, support_hi: float) -> float:
    """Trapezoid integral of a sampled line over [a, b] within its support.

    ``vals`` are samples on the uniform ``coords``; the function is genuine on
    [support_lo, support_hi] and zero outside. Endpoint values falling between
    nodes are linearly extended from the nearest two genuine nodes (clamped at
    zero), so mass in partial edge cells is kept to second order.
    """
    h = coords[1] - coords[0]
    a = max(a, support_lo, coords[0])
    b = min(b, support_hi, coords[-1])
    if b - a <= 1e-15 * (1.0 + abs(b)):
        return 0.0
    tol = 1e-9 * (1.0 + abs(support_hi))
    ga = min(max(int(math.ceil((support_lo - tol) / h)), 0), len(coords) - 1)
    gb = max(min(int(math.floor((support_hi + tol) / h)), len(coords) - 1), 0)
    if gb < ga:
        return 0.0
    i0 = int(math.ceil((a - tol) / h))
    i1 = int(math.floor((b + tol) / h))
    i0 = min(max(i0, ga), gb + 1)
    i1 = max(min(i1, gb), ga - 1)
    if i1 < i0:
        va = _edge_value(vals, h, a, ga, gb)
        vb = _edge_value(vals, h, b, ga, gb)
        return (b - a) * 0.5 * (va + vb)
    total = 0.0
    if i1 > i0:
        seg = vals[i0:i1 + 1]
        total += h * (seg.sum() - 0.5 * (seg[0] + seg[-1]))
    left = i0 * h - a
    if left > tol:
        total += left * 0.5 * (_edge_value(vals, h, a, ga, gb) + max(0.0, float(vals[i0])))
    right = b - i1 * h
    if right > tol:
        total += right * 0.5 * (max(0.0, float(vals[i1])) + _edge_value(vals, h, b, ga, gb))
    return total


def line_cumulative(coords: np.ndarray, vals: np.ndarray, a: float, b: float,
                    support_lo: float, support_hi: float) -> np.ndarray:
    """Per-node cumulative of ``line_integral`` from a: out[i] = integral over [a, min(x_i, b)].

    Nodes below a get 0; nodes beyond b saturate at the full integral.
    """
    h = coords[1] - coords[0]
    out = np.zeros_like(vals)
    a_eff = max(a, support_lo, coords[0])
    b_eff = min(b, support_hi, coords[-1])
    if b_eff - a_eff <= 1e-15 * (1.0 + abs(b_eff)):
        return out
    tol = 1e-9 * (1.0 + abs(support_hi))
    ga = min(max(int(math.ceil((support_lo - tol) / h)), 0), len(coords) - 1)
    gb = max(min(int(math.floor((support_hi + tol) / h)), len(coords) - 1), 0)
    if gb < ga:
        return out
    i0 = min(max(int(math.ceil((a_eff - tol) / h)), ga), gb + 1)
    va = _edge_value(vals, h, a_eff, ga, gb)
    run = 0.0
    prev_x = a_eff
    prev_v = va
    full = None
    for i in range(max(i0, 0), len(coords)):
        x = coords[i]
        if x >= b_eff - tol and full is None:
            run += (b_eff - prev_x) * 0.5 * (prev_v + _edge_value(vals, h, b_eff, ga, gb))
            full = run
            out[i] = full
            continue
        if full is not None:
            out[i] = full
            continue
        v = max(0.0, float(vals[i])) if ga <= i <= gb else _edge_value(vals, h, x, ga, gb)
        run += (x - prev_x) * 0.5 * (prev_v + v)
        out[i] = run
        prev_x = x
        prev_v = v
    return out


def extend_across_wedge(values: np.ndarray, spec: GridSpec, n: int, reach: int = 4) -> np.ndarray:
    """Continue density values linearly past the wedge edges z <= y <= n*z.

    Bilinear cells that straddle a support edge mix genuine values with the
    zeros outside, which degrades anything interpolated there to first order.
    This returns a copy where, in each column, up to ``reach`` rows beyond the
    wedge carry a linear continuation from the outermost two inside rows
    (clamped at 0). Rows further out stay zero. Columns with fewer than two
    inside rows copy the single value instead.
    """
    lo, hi = wedge_row_bounds(spec, n)
    out = np.array(values, dtype=np.float64, copy=True)
    n_y = spec.n_y
    for j in range(spec.n_z):
        a, b = int(lo[j]), int(hi[j])
        if a > b:
            continue
        if a == b:
            v = float(values[a, j])
            for i in range(max(0, a - reach), min(n_y, b + reach + 1)):
                out[i, j] = v
            continue
        va, vb = float(values[a, j]), float(values[a + 1, j])
        slope_lo = vb - va
        for step in range(1, reach + 1):
            i = a - step
            if i < 0:
                break
            out[i, j] = max(0.0, va - slope_lo * step)
        vc, vd = float(values[b - 1, j]), float(values[b, j])
        slope_hi = vd - vc
        for step in range(1, reach + 1):
            i = b + step
            if i >= n_y:
                break
            out[i, j] = max(0.0, vd + slope_hi * step)
    return out
