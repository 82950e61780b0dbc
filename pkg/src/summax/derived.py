"""Quantities derived from a joint grid or mass table: ratio probabilities,
marginals, conditionals and moments.

The peak-to-average ratio of n variables is max/(sum/n); its joint event
{alpha <= ratio <= beta} is the wedge slice between the rays z = r_lo*y and
z = r_hi*y with r_lo = max(alpha, 1)/n and r_hi = min(beta/n, 1). Continuous
probabilities integrate the density grid cell by cell, clipping boundary
cells against the two rays and weighting each cell by the covered area.
Discrete probabilities sum lattice masses exactly; the ratio is undefined at
sum 0, so those sums start at l = 1 and ``prob_zero_sum`` reports the mass
left out.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .disc_engine import PmfTriangle
from .errors import DegenerateSliceError, EngineError, GridError
from .grids import GridFunction2D, extend_across_wedge, line_integral

__all__ = [
    "PaprQuery",
    "Table1D",
    "papr_prob_continuous",
    "papr_prob_discrete",
    "marginal_sum",
    "marginal_max",
    "conditional",
    "expectation",
    "joint_moment",
    "prob_zero_sum",
]


@dataclass(frozen=True)
class PaprQuery:
    """A ratio band [alpha, beta] for the peak-to-average ratio of n variables."""

    alpha: float
    beta: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise EngineError("ratio bounds must be finite")
        if self.alpha < 0.0:
            raise EngineError("alpha must be >= 0")
        if self.beta < self.alpha:
            raise EngineError("beta must be >= alpha")
        if self.n < 1:
            raise EngineError("n must be >= 1")


@dataclass(eq=False)
class Table1D:
    """A 1-D marginal or conditional: values over one coordinate axis.

    ``axis`` names the free coordinate ("sum" or "max"); ``at`` records the
    conditioning value (snapped to the grid) when the table is a conditional
    slice, and stays None for marginals.
    """

    axis: str
    coords: np.ndarray
    values: np.ndarray
    kind: str  # "density" or "mass"
    at: float | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.axis not in ("sum", "max"):
            raise GridError(f"unknown table axis {self.axis!r}")
        if self.coords.shape != self.values.shape or self.coords.ndim != 1:
            raise GridError("table coordinates and values must be matching vectors")

    def to_json_dict(self) -> dict:
        return {
            "spec": "summax-table-1",
            "axis": self.axis,
            "kind": self.kind,
            "at": self.at,
            "coordinates": self.coords.tolist(),
            "values": self.values.tolist(),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["coordinate", "value"])
            for c, v in zip(self.coords, self.values):
                writer.writerow([f"{c:.17g}", f"{v:.17g}"])


def _ray_bounds(q: PaprQuery) -> tuple[float, float]:
    return max(q.alpha, 1.0) / q.n, min(q.beta / q.n, 1.0)


def _clip_halfplane(poly, sign):
    out = []
    k = len(poly)
    for idx in range(k):
        p = poly[idx]
        r = poly[(idx + 1) % k]
        sp = sign(p)
        sr = sign(r)
        if sp >= 0.0:
            out.append(p)
        if (sp >= 0.0) != (sr >= 0.0):
            t = sp / (sp - sr)
            out.append((p[0] + t * (r[0] - p[0]), p[1] + t * (r[1] - p[1])))
    return out


def _poly_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    a = 0.0
    k = len(poly)
    for idx in range(k):
        x1, y1 = poly[idx]
        x2, y2 = poly[(idx + 1) % k]
        a += x1 * y2 - x2 * y1
    return abs(a) * 0.5


def papr_prob_continuous(joint: GridFunction2D, query: PaprQuery) -> float:
    """Probability that the peak-to-average ratio lies in [alpha, beta].

    Integrates the density grid over the band between the two rays: interior
    cells contribute their corner mean times the cell area, boundary cells the
    corner mean times the clipped polygon area. Corner values come from a
    wedge-extended copy of the grid so cells straddling the support edge keep
    second-order accuracy.
    """
    if joint.kind != "pdf":
        raise GridError("papr_prob_continuous needs a density grid")
    if query.n != joint.n:
        raise EngineError(f"query is for n={query.n} but the grid holds n={joint.n}")
    r_lo, r_hi = _ray_bounds(query)
    if r_hi <= r_lo:
        return 0.0
    spec = joint.spec
    y = spec.y_nodes()
    z = spec.z_nodes()
    ext = extend_across_wedge(joint.values, spec, joint.n)
    corner_mean = 0.25 * (ext[:-1, :-1] + ext[1:, :-1] + ext[:-1, 1:] + ext[1:, 1:])
    s_lo = z[None, :] - r_lo * y[:, None]
    s_hi = r_hi * y[:, None] - z[None, :]
    in_lo = s_lo >= 0.0
    in_hi = s_hi >= 0.0
    cnt_lo = (in_lo[:-1, :-1].astype(np.int8) + in_lo[1:, :-1]
              + in_lo[:-1, 1:] + in_lo[1:, 1:])
    cnt_hi = (in_hi[:-1, :-1].astype(np.int8) + in_hi[1:, :-1]
              + in_hi[:-1, 1:] + in_hi[1:, 1:])
    full = (cnt_lo == 4) & (cnt_hi == 4)
    empty = (cnt_lo == 0) | (cnt_hi == 0)
    cell_area = spec.h_y * spec.h_z
    total = float(corner_mean[full].sum()) * cell_area
    for i, j in zip(*np.nonzero(~(full | empty))):
        poly = [(y[i], z[j]), (y[i + 1], z[j]),
                (y[i + 1], z[j + 1]), (y[i], z[j + 1])]
        poly = _clip_halfplane(poly, lambda p: p[1] - r_lo * p[0])
        poly = _clip_halfplane(poly, lambda p: r_hi * p[0] - p[1])
        total += corner_mean[i, j] * _poly_area(poly)
    return min(max(total, 0.0), 1.0)


def _iceil(v: float) -> int:
    return int(math.ceil(v - 1e-9 * (1.0 + abs(v))))


def _ifloor(v: float) -> int:
    return int(math.floor(v + 1e-9 * (1.0 + abs(v))))


def papr_prob_discrete(triangle: PmfTriangle, query: PaprQuery) -> float:
    """Exact lattice probability of the ratio band, summed over sums l >= 1.

    States with sum 0 have no defined ratio and are excluded; their mass is
    available separately through prob_zero_sum.
    """
    if not isinstance(triangle, PmfTriangle):
        raise EngineError("papr_prob_discrete needs a joint mass table")
    if query.n != triangle.n:
        raise EngineError(f"query is for n={query.n} but the table holds n={triangle.n}")
    lo_slope = max(query.alpha, 1.0) / query.n
    hi_slope = min(query.beta / query.n, 1.0)
    total = 0.0
    masses = triangle.masses
    for l in range(1, triangle.l_max + 1):
        m_lo = max(_iceil(lo_slope * l), 0)
        m_hi = min(_ifloor(hi_slope * l), triangle.m_max)
        if m_hi >= m_lo:
            total += float(masses[l, m_lo:m_hi + 1].sum())
    return total


def prob_zero_sum(triangle: PmfTriangle) -> float:
    """Mass of the all-zero outcome, where the ratio is undefined."""
    if not isinstance(triangle, PmfTriangle):
        raise EngineError("prob_zero_sum needs a joint mass table")
    return float(triangle.masses[0, :].sum())


def marginal_sum(joint) -> Table1D:
    """Marginal law of the sum: wedge-aware row integrals, or exact row sums."""
    if isinstance(joint, PmfTriangle):
        return Table1D("sum", np.arange(joint.l_max + 1, dtype=np.float64),
                       joint.masses.sum(axis=1), "mass")
    if joint.kind != "pdf":
        raise GridError("continuous marginals need a density grid")
    spec = joint.spec
    y = spec.y_nodes()
    z = spec.z_nodes()
    vals = np.empty(spec.n_y)
    for i in range(spec.n_y):
        vals[i] = line_integral(z, joint.values[i, :], 0.0, z[-1],
                                y[i] / joint.n, y[i])
    return Table1D("sum", y, vals, "density")


def marginal_max(joint) -> Table1D:
    """Marginal law of the max: wedge-aware column integrals, or exact column sums."""
    if isinstance(joint, PmfTriangle):
        return Table1D("max", np.arange(joint.m_max + 1, dtype=np.float64),
                       joint.masses.sum(axis=0), "mass")
    if joint.kind != "pdf":
        raise GridError("continuous marginals need a density grid")
    spec = joint.spec
    y = spec.y_nodes()
    z = spec.z_nodes()
    vals = np.empty(spec.n_z)
    for j in range(spec.n_z):
        vals[j] = line_integral(y, joint.values[:, j], 0.0, y[-1],
                                z[j], joint.n * z[j])
    return Table1D("max", z, vals, "density")


def conditional(joint, axis: str, value: float) -> Table1D:
    """Conditional law of one coordinate given the other.

    ``axis`` names the conditioning coordinate: axis="max" returns the law of
    the sum given max = value, axis="sum" the law of the max given sum = value.
    Continuous slices snap the value to the nearest grid line and normalize by
    that line's own integral, so re-multiplying reproduces the slice exactly.
    A slice whose integral is below 1e-12 raises DegenerateSliceError.
    """
    if axis not in ("sum", "max"):
        raise GridError(f"unknown conditioning axis {axis!r}")
    if isinstance(joint, PmfTriangle):
        k = int(round(value))
        if k != value:
            raise EngineError("discrete conditioning values must be integers")
        if axis == "max":
            if not 0 <= k <= joint.m_max:
                raise DegenerateSliceError(f"max = {k} lies outside the table")
            col = joint.masses[:, k]
            tot = float(col.sum())
            if tot <= 1e-12:
                raise DegenerateSliceError(f"no mass on the slice max = {k}")
            return Table1D("sum", np.arange(joint.l_max + 1, dtype=np.float64),
                           col / tot, "mass", at=float(k))
        if not 0 <= k <= joint.l_max:
            raise DegenerateSliceError(f"sum = {k} lies outside the table")
        row = joint.masses[k, :]
        tot = float(row.sum())
        if tot <= 1e-12:
            raise DegenerateSliceError(f"no mass on the slice sum = {k}")
        return Table1D("max", np.arange(joint.m_max + 1, dtype=np.float64),
                       row / tot, "mass", at=float(k))
    if joint.kind != "pdf":
        raise GridError("continuous conditionals need a density grid")
    spec = joint.spec
    y = spec.y_nodes()
    z = spec.z_nodes()
    if axis == "max":
        j = int(round(value / spec.h_z))
        if not 0 <= j < spec.n_z:
            raise DegenerateSliceError(f"max = {value} lies outside the grid")
        col = joint.values[:, j]
        tot = line_integral(y, col, 0.0, y[-1], z[j], joint.n * z[j])
        if tot <= 1e-12:
            raise DegenerateSliceError(f"slice max = {z[j]:.6g} carries no mass")
        return Table1D("sum", y, col / tot, "density", at=float(z[j]))
    i = int(round(value / spec.h_y))
    if not 0 <= i < spec.n_y:
        raise DegenerateSliceError(f"sum = {value} lies outside the grid")
    row = joint.values[i, :]
    tot = line_integral(z, row, 0.0, z[-1], y[i] / joint.n, y[i])
    if tot <= 1e-12:
        raise DegenerateSliceError(f"slice sum = {y[i]:.6g} carries no mass")
    return Table1D("max", z, row / tot, "density", at=float(y[i]))


def expectation(joint, h) -> float:
    """E[h(sum, max)] against a density grid or mass table; h must vectorize."""
    if isinstance(joint, PmfTriangle):
        ls = np.arange(joint.l_max + 1, dtype=np.float64)[:, None]
        ms = np.arange(joint.m_max + 1, dtype=np.float64)[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            hv = np.asarray(h(ls, ms), dtype=np.float64)
        hv = np.broadcast_to(hv, joint.masses.shape)
        terms = np.where(joint.masses > 0.0, hv * joint.masses, 0.0)
        if not np.all(np.isfinite(terms)):
            raise EngineError("non-finite integrand values on the mass support")
        return float(terms.sum())
    if joint.kind != "pdf":
        raise GridError("expectations need a density grid")
    spec = joint.spec
    y = spec.y_nodes()
    z = spec.z_nodes()
    col_ints = np.empty(spec.n_z)
    for j in range(spec.n_z):
        with np.errstate(invalid="ignore", divide="ignore"):
            integrand = np.asarray(h(y, z[j]), dtype=np.float64) * joint.values[:, j]
        if not np.all(np.isfinite(integrand)):
            raise EngineError("non-finite integrand values encountered")
        col_ints[j] = line_integral(y, integrand, 0.0, y[-1], z[j], joint.n * z[j])
    return float(np.trapezoid(col_ints, z))


def joint_moment(joint, a: float, b: float) -> float:
    """E[sum^a * max^b]. Negative exponents are rejected when the support
    reaches the origin, which a continuous wedge grid always does."""
    if isinstance(joint, PmfTriangle):
        if (a < 0 and float(joint.masses[0, :].sum()) > 0.0) or \
           (b < 0 and float(joint.masses[:, 0].sum()) > 0.0):
            raise EngineError("negative exponent meets mass at zero; the moment diverges")
        return expectation(joint, lambda l, m: np.power(np.maximum(l, 1e-300), float(a))
                           * np.power(np.maximum(m, 1e-300), float(b)))
    if a < 0 or b < 0:
        raise EngineError("negative exponents are not integrable on a grid whose"
                          " support touches the origin")
    return expectation(joint, lambda yy, zz: np.power(yy, float(a)) * np.power(zz, float(b)))
