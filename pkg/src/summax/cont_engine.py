"""Recurrence engines for the joint law of sum and max of continuous variables.

Two routes are implemented on uniform grids. The distribution-function route
(`cdf_recursive`) folds one variable at a time into the running joint CDF; the
density route (`pdf_recursive`, `pdf_iid_recursive`) does the same for the
joint density on the support wedge z <= y <= n*z and never materializes the
degenerate single-variable density. `cdf_direct_smalln` is an independent
tensor-quadrature cross-check for up to four variables, and `cdf_from_pdf`
bridges the two routes. Shifted variables are handled by `cdf_shifted` and
`pdf_shifted`, which reduce every model to a common shift and query a
translated base grid. `cdf_mixed` accepts continuous and integer models
together for the joint CDF.
"""
from __future__ import annotations

import math

import numpy as np

from ._kernels import conv_trap, cdf_step_kernel, pdf_step3_kernel, pdf_step_kernel
from .disc_engine import cdf_recursive_discrete
from .errors import EngineError, GridError
from .grids import (
    GridFunction2D,
    GridSpec,
    default_grid_spec,
    extend_across_wedge,
    line_cumulative,
    wedge_row_bounds,
)
from .models import (
    ContinuousFamily,
    ContinuousModel,
    DiscreteModel,
    cdf_eval,
    dcdf_eval,
    model_fingerprint,
    pdf_eval,
)

__all__ = [
    "cdf_recursive",
    "pdf_recursive",
    "pdf_iid_recursive",
    "pdf_bootstrap_g2",
    "cdf_from_pdf",
    "cdf_direct_smalln",
    "cdf_shifted",
    "pdf_shifted",
    "cdf_mixed",
    "cdf_mixed_at",
]

_EMPTY = np.zeros(0)

_FAMILY_CODE = {
    ContinuousFamily.EXPONENTIAL: 0,
    ContinuousFamily.UNIFORM: 1,
    ContinuousFamily.GAMMA: 2,
    ContinuousFamily.WEIBULL: 3,
    ContinuousFamily.TABULATED: 4,
}


def _pack(model: ContinuousModel, off: float = 0.0):
    """Kernel parameter tuple (code, p0, p1, table_x, table_d, off) for a base law."""
    code = _FAMILY_CODE[model.family]
    if model.family is ContinuousFamily.TABULATED:
        return (code, 0.0, 0.0, model.table_x, model.table_d, float(off))
    p0 = float(model.params[0])
    p1 = float(model.params[1]) if len(model.params) > 1 else 0.0
    return (code, p0, p1, _EMPTY, _EMPTY, float(off))


def _check_continuous(models, op: str) -> None:
    if not models:
        raise EngineError(f"{op} needs at least one model")
    for k, m in enumerate(models):
        if not isinstance(m, ContinuousModel):
            raise EngineError(f"{op} accepts continuous models only; variable {k + 1} is not")


def _check_unshifted(models, op: str) -> None:
    for k, m in enumerate(models):
        if m.shift != 0.0:
            raise EngineError(
                f"{op} works on unshifted laws; variable {k + 1} has shift {m.shift}."
                " Use cdf_shifted/pdf_shifted for translated variables.")


def _strip_shift(model):
    if model.shift == 0.0:
        return model
    if isinstance(model, ContinuousModel):
        return ContinuousModel(model.family, model.params, 0.0, model.table_x, model.table_d)
    return DiscreteModel(model.family, model.params, 0, model.truncation_epsilon, model.probs)


def _cdf_grid(models, spec: GridSpec, offsets=None) -> np.ndarray:
    """Joint CDF values on the grid for base laws right-translated by offsets."""
    n = len(models)
    if offsets is None:
        offsets = [0.0] * n
    y = spec.y_nodes()
    z = spec.z_nodes()
    vals = cdf_eval(models[0], np.minimum.outer(y, z) - offsets[0])
    vals = np.asarray(vals, dtype=np.float64)
    diag = np.asarray(cdf_eval(models[0], y - offsets[0]), dtype=np.float64)
    for k in range(1, n):
        prev_cols = np.empty((spec.n_z, spec.n_y + 1))
        prev_cols[:, : spec.n_y] = vals.T
        prev_cols[:, spec.n_y] = vals[-1, :]
        diag_prev = np.empty(spec.n_y + 1)
        diag_prev[: spec.n_y] = diag
        diag_prev[spec.n_y] = diag[-1]
        out_cols, diag_new = cdf_step_kernel(
            np.ascontiguousarray(prev_cols), diag_prev,
            spec.n_y, spec.n_z, spec.h_y, spec.h_z,
            *_pack(models[k], offsets[k]))
        vals = np.ascontiguousarray(out_cols.T)
        diag = diag_new[: spec.n_y].copy()
    np.clip(vals, 0.0, 1.0, out=vals)
    return vals


def cdf_recursive(models, spec: GridSpec | None = None) -> GridFunction2D:
    """Joint CDF of (sum, max) on a grid, one quadrature fold per variable.

    Nodes with z >= y carry the value at (y, y) exactly, matching the
    degeneracy of the joint law there.
    """
    models = list(models)
    _check_continuous(models, "cdf_recursive")
    _check_unshifted(models, "cdf_recursive")
    if spec is None:
        spec = default_grid_spec(models)
    vals = _cdf_grid(models, spec)
    return GridFunction2D(spec, "cdf", len(models), model_fingerprint(models), vals)


def _g2_values(m1, m2, spec: GridSpec, d1: float = 0.0, d2: float = 0.0) -> np.ndarray:
    """Closed-form two-variable joint density on the wedge z <= y <= 2z."""
    lo, hi = wedge_row_bounds(spec, 2)
    y = spec.y_nodes()
    z = spec.z_nodes()
    vals = np.zeros((spec.n_y, spec.n_z))
    for j in range(spec.n_z):
        a, b = int(lo[j]), int(hi[j])
        if a > b:
            continue
        u = np.clip(y[a:b + 1] - z[j], 0.0, z[j])
        f1u = pdf_eval(m1, u - d1)
        f2u = pdf_eval(m2, u - d2)
        f1z = float(pdf_eval(m1, z[j] - d1))
        f2z = float(pdf_eval(m2, z[j] - d2))
        vals[a:b + 1, j] = f1u * f2z + f1z * f2u
    return vals


def pdf_bootstrap_g2(models, spec: GridSpec | None = None) -> GridFunction2D:
    """Joint density of (sum, max) of exactly two variables from its closed form."""
    models = list(models)
    if len(models) != 2:
        raise EngineError("pdf_bootstrap_g2 needs exactly two models")
    _check_continuous(models, "pdf_bootstrap_g2")
    _check_unshifted(models, "pdf_bootstrap_g2")
    if spec is None:
        spec = default_grid_spec(models)
    vals = _g2_values(models[0], models[1], spec)
    return GridFunction2D(spec, "pdf", 2, model_fingerprint(models), vals)


def _extended_pair(vals: np.ndarray, spec: GridSpec, level: int):
    """Wedge-extended copies of a density grid in the layouts the kernels read."""
    ext = extend_across_wedge(vals, spec, level)
    rows = np.empty((spec.n_y + 1, spec.n_z + 1))
    rows[: spec.n_y, : spec.n_z] = ext
    rows[spec.n_y, : spec.n_z] = ext[-1, :]
    rows[:, spec.n_z] = rows[:, spec.n_z - 1]
    cols = np.ascontiguousarray(rows[:, : spec.n_z].T)
    return np.ascontiguousarray(rows), cols


def _check_level(vals: np.ndarray, level: int) -> None:
    mn = float(vals.min())
    if mn < -1e-9:
        raise EngineError(f"density recurrence went negative ({mn:.3e}) at level {level}")
    np.clip(vals, 0.0, None, out=vals)


def _factored_fill(vals, spec: GridSpec, fz_rows, loo, fine, lo, hi) -> None:
    """Exact product-form density on the half-wedge where the cap is inactive.

    Wherever y - z <= z every non-max variable is automatically below the
    max, so the joint density factors into sum_i f_i(z) * conv_{j!=i}(y - z)
    with plain unconstrained convolutions. The step kernel leaves these nodes
    at 0 and this fill writes them from the fine-grid ladders; near the wedge
    tip the strip is narrower than a grid cell and this form is the only
    accurate one available.
    """
    y = spec.y_nodes()
    h_y = spec.h_y
    for j in range(1, spec.n_z):
        z = j * spec.h_z
        i_lo = int(lo[j])
        i_hi = int(math.floor(2.0 * z / h_y + 1e-9))
        if i_hi > int(hi[j]):
            i_hi = int(hi[j])
        if i_hi < i_lo:
            continue
        u = np.clip(y[i_lo:i_hi + 1] - z, 0.0, None)
        acc = np.zeros(u.size)
        for t in range(fz_rows.shape[0]):
            fzv = fz_rows[t, j]
            if fzv != 0.0:
                acc += fzv * np.interp(u, fine, loo[t])
        vals[i_lo:i_hi + 1, j] = acc


def _corner_child_spec(spec: GridSpec, n: int) -> GridSpec | None:
    """Refined self-contained sub-grid for the small-z corner, or None.

    Columns whose wedge spans only a handful of y-cells cannot resolve the
    recurrence integrands. Both recurrence terms read the previous level at
    points dominated by the output node, so the corner [0, n*z_c] x [0, z_c]
    is closed under the recursion and can be recomputed on a square grid at
    the z resolution (or finer, when the parent is already square).
    """
    if spec.h_z <= spec.h_y / 3.0:
        h_c = spec.h_z
        z_c = min(spec.z_max, 24.0 * spec.h_y)
    else:
        h_c = min(spec.h_y, spec.h_z) / 5.0
        z_c = min(spec.z_max, 48.0 * spec.h_y)
    n_z = int(round(z_c / h_c)) + 1
    z_c = (n_z - 1) * h_c
    y_c = min(spec.y_max, n * z_c)
    n_y = int(round(y_c / h_c)) + 1
    y_c = (n_y - 1) * h_c
    if n_z < 16 or n_y < 16 or y_c < z_c:
        return None
    return GridSpec(y_c, z_c, n_y, n_z)


def _corner_patch(vals, spec: GridSpec, child: GridFunction2D, lo, hi) -> None:
    """Overwrite cap-active corner nodes from the refined sub-grid."""
    y = spec.y_nodes()
    h_y = spec.h_y
    j_top = min(spec.n_z - 1, int(math.floor(child.spec.z_max / spec.h_z + 1e-9)))
    i_cap = int(math.floor(child.spec.y_max / h_y + 1e-9))
    for j in range(1, j_top + 1):
        z = j * spec.h_z
        i_seam = int(math.floor(2.0 * z / h_y + 1e-9))
        i_lo = max(int(lo[j]), i_seam + 1)
        i_hi = min(int(hi[j]), i_cap)
        if i_hi < i_lo:
            continue
        ys = y[i_lo:i_hi + 1]
        vals[i_lo:i_hi + 1, j] = child.eval(ys, np.full(ys.size, z))


def _pdf_levels(models, spec: GridSpec, offsets, iid: bool, keep_levels: bool,
                fingerprints, depth: int = 0) -> dict[int, GridFunction2D] | GridFunction2D:
    n = len(models)
    packs = [_pack(m, d) for m, d in zip(models, offsets)]
    out: dict[int, GridFunction2D] = {}

    cur = _g2_values(models[0], models[1], spec, offsets[0], offsets[1])
    _check_level(cur, 2)
    if keep_levels or n == 2:
        out[2] = GridFunction2D(spec, "pdf", 2, fingerprints[2], cur.copy())
    if n >= 3:
        lo, hi = wedge_row_bounds(spec, 3)
        cols = pdf_step3_kernel(lo, hi, spec.n_y, spec.n_z, spec.h_y, spec.h_z,
                                iid, *packs[0], *packs[1], *packs[2])
        cur = np.ascontiguousarray(cols.T)
        _check_level(cur, 3)
        if keep_levels or n == 3:
            out[3] = GridFunction2D(spec, "pdf", 3, fingerprints[3], cur.copy())
    if n >= 4:
        # fine 1-D grid for the unconstrained convolutions feeding the
        # product-form half of each level; leave-one-out ladders are updated
        # incrementally as variables fold in
        delta = 0.5 * spec.h_z
        fine = np.arange(int(math.ceil(spec.z_max / delta)) + 2) * delta
        f_fine = [np.asarray(pdf_eval(m, fine - d), dtype=np.float64)
                  for m, d in zip(models, offsets)]
        loo = [conv_trap(f_fine[1], f_fine[2], delta),
               conv_trap(f_fine[0], f_fine[2], delta),
               conv_trap(f_fine[0], f_fine[1], delta)]
        z_nodes = spec.z_nodes()
        fz_all = np.stack([np.asarray(pdf_eval(m, z_nodes - d), dtype=np.float64)
                           for m, d in zip(models, offsets)])
        child_levels = None
        if depth < 2:
            child_spec = _corner_child_spec(spec, n)
            if child_spec is not None:
                child_levels = _pdf_levels(models, child_spec, offsets, iid, True,
                                           fingerprints, depth + 1)
    for k in range(4, n + 1):
        rows, cols_in = _extended_pair(cur, spec, k - 1)
        lo, hi = wedge_row_bounds(spec, k)
        cols = pdf_step_kernel(rows, cols_in, lo, hi, k,
                               spec.n_y, spec.n_z, spec.h_y, spec.h_z,
                               iid, *packs[k - 1])
        cur = np.ascontiguousarray(cols.T)
        full = conv_trap(loo[0], f_fine[0], delta)
        loo = [conv_trap(c, f_fine[k - 1], delta) for c in loo]
        loo.append(full)
        _factored_fill(cur, spec, fz_all[:k], loo, fine, lo, hi)
        if child_levels is not None:
            _corner_patch(cur, spec, child_levels[k], lo, hi)
        _check_level(cur, k)
        if keep_levels or k == n:
            out[k] = GridFunction2D(spec, "pdf", k, fingerprints[k], cur.copy())
    return out if keep_levels else out[n]


def pdf_recursive(models, spec: GridSpec | None = None, keep_levels: bool = False):
    """Joint density of (sum, max) on the support wedge for two or more variables.

    Level 2 is the closed form, level 3 integrates that form pointwise, and
    higher levels integrate the previous grid with interpolation. Returns the
    final grid, or a dict keyed by level when ``keep_levels`` is set.
    """
    models = list(models)
    _check_continuous(models, "pdf_recursive")
    _check_unshifted(models, "pdf_recursive")
    if len(models) < 2:
        raise EngineError("pdf_recursive needs at least two models; the one-variable"
                          " joint density is a line mass, use the CDF instead")
    if spec is None:
        spec = default_grid_spec(models)
    fps = {k: model_fingerprint(models[:k]) for k in range(2, len(models) + 1)}
    return _pdf_levels(models, spec, [0.0] * len(models), False, keep_levels, fps)


def pdf_iid_recursive(model, n: int, spec: GridSpec | None = None,
                      keep_levels: bool = False):
    """Joint density for n copies of one law, using the symmetric recurrence.

    Each level needs a single integral scaled by the level count, roughly
    halving the work of the general route.
    """
    if n < 2:
        raise EngineError("pdf_iid_recursive needs n >= 2")
    models = [model] * n
    _check_continuous(models, "pdf_iid_recursive")
    _check_unshifted(models, "pdf_iid_recursive")
    if spec is None:
        spec = default_grid_spec(models)
    fps = {k: model_fingerprint(models[:k]) for k in range(2, n + 1)}
    return _pdf_levels(models, spec, [0.0] * n, True, keep_levels, fps)


def cdf_from_pdf(joint: GridFunction2D) -> GridFunction2D:
    """Integrate a density grid over the wedge up to each node, giving the CDF."""
    if joint.kind != "pdf":
        raise GridError("cdf_from_pdf needs a density grid")
    spec = joint.spec
    n = joint.n
    y = spec.y_nodes()
    z = spec.z_nodes()
    inner = np.zeros((spec.n_y, spec.n_z))
    for j in range(spec.n_z):
        inner[:, j] = line_cumulative(y, joint.values[:, j], 0.0, y[-1],
                                      z[j], n * z[j])
    vals = np.zeros_like(inner)
    vals[:, 1:] = np.cumsum((inner[:, 1:] + inner[:, :-1]) * (0.5 * spec.h_z), axis=1)
    np.clip(vals, 0.0, 1.0, out=vals)
    return GridFunction2D(spec, "cdf", n, joint.model_fingerprint, vals)


def cdf_direct_smalln(models, y: float, z: float, quad_points: int) -> float:
    """Joint CDF at one point by tensor-product Simpson over [0, z]^(n-1).

    Independent of the recurrence code path; cost grows as quad_points^(n-1),
    so it is limited to 2 <= n <= 4. Even quad_points are rounded up to odd.
    """
    models = list(models)
    n = len(models)
    if not 2 <= n <= 4:
        raise EngineError("cdf_direct_smalln supports 2 to 4 variables")
    _check_continuous(models, "cdf_direct_smalln")
    _check_unshifted(models, "cdf_direct_smalln")
    q = int(quad_points)
    if q < 3:
        raise EngineError("quad_points must be at least 3")
    if q % 2 == 0:
        q += 1
    y = float(y)
    z = float(z)
    if not (math.isfinite(y) and math.isfinite(z)):
        raise EngineError("query point must be finite")
    if y <= 0.0 or z <= 0.0:
        return 0.0
    nodes = np.linspace(0.0, z, q)
    w = np.full(q, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= (z / (q - 1)) / 3.0
    dens = [np.asarray(pdf_eval(m, nodes), dtype=np.float64) * w for m in models[1:]]
    if n == 2:
        s = nodes
        weight = dens[0]
    elif n == 3:
        s = nodes[:, None] + nodes[None, :]
        weight = dens[0][:, None] * dens[1][None, :]
    else:
        s = nodes[:, None, None] + nodes[None, :, None] + nodes[None, None, :]
        weight = (dens[0][:, None, None] * dens[1][None, :, None]
                  * dens[2][None, None, :])
    head = cdf_eval(models[0], np.minimum(y - s, z))
    return float(np.sum(weight * head))


def cdf_shifted(models, spec: GridSpec | None = None, y=0.0, z=0.0):
    """Joint CDF of shifted variables at (y, z), via a common-shift base grid.

    Every model is re-expressed against the largest shift c: the base grid
    describes the law of the right-translated nonnegative variables, and the
    query point moves to (y + n*c, z + c). Points whose translated image falls
    outside the grid raise GridError.
    """
    models = list(models)
    _check_continuous(models, "cdf_shifted")
    n = len(models)
    c = max(m.shift for m in models)
    offsets = [c - m.shift for m in models]
    bases = [_strip_shift(m) for m in models]
    if spec is None:
        spec = default_grid_spec(models)
    if n == 1:
        arg = np.minimum(np.asarray(y, dtype=np.float64) + c,
                         np.asarray(z, dtype=np.float64) + c)
        return cdf_eval(bases[0], arg)
    vals = _cdf_grid(bases, spec, offsets)
    g = GridFunction2D(spec, "cdf", n, model_fingerprint(models), vals)
    return g.eval(np.asarray(y, dtype=np.float64) + n * c,
                  np.asarray(z, dtype=np.float64) + c)


def pdf_shifted(models, spec: GridSpec | None = None, y=0.0, z=0.0):
    """Joint density of shifted variables at (y, z); see cdf_shifted.

    The translated density equals the base density at (y + n*c, z + c), with
    no Jacobian factor.
    """
    models = list(models)
    _check_continuous(models, "pdf_shifted")
    n = len(models)
    if n < 2:
        raise EngineError("pdf_shifted needs at least two models")
    c = max(m.shift for m in models)
    offsets = [c - m.shift for m in models]
    bases = [_strip_shift(m) for m in models]
    if spec is None:
        spec = default_grid_spec(models)
    fps = {k: model_fingerprint(models[:k]) for k in range(2, n + 1)}
    g = _pdf_levels(bases, spec, offsets, False, False, fps)
    return g.eval(np.asarray(y, dtype=np.float64) + n * c,
                  np.asarray(z, dtype=np.float64) + c)


def _snapped_floor(v: float) -> int:
    return int(math.floor(v + 1e-9 * (1.0 + abs(v))))


def cdf_mixed(models, spec: GridSpec | None = None) -> GridFunction2D:
    """Joint CDF for a mix of continuous and integer-valued variables.

    The continuous part is folded first on the grid; each integer variable
    then enters through its exact mass function, truncated per column at
    floor(z). With no integer variables this reduces to cdf_recursive, with
    no continuous ones to the exact lattice law evaluated on the grid.
    """
    models = list(models)
    if not models:
        raise EngineError("cdf_mixed needs at least one model")
    for k, m in enumerate(models):
        if not isinstance(m, (ContinuousModel, DiscreteModel)):
            raise EngineError(f"cdf_mixed accepts continuous or discrete models;"
                              f" variable {k + 1} is neither")
    _check_unshifted(models, "cdf_mixed")
    cont = [m for m in models if isinstance(m, ContinuousModel)]
    disc = [m for m in models if isinstance(m, DiscreteModel)]
    if spec is None:
        spec = default_grid_spec(models)
    n = len(models)
    y = spec.y_nodes()
    z = spec.z_nodes()
    analytic_base = None
    if cont:
        base = _cdf_grid(cont, spec)
        fold = disc
    else:
        analytic_base = disc[0]
        base = None
        fold = disc[1:]
        if not fold:
            vals = np.asarray(dcdf_eval(analytic_base, np.minimum.outer(y, z)),
                              dtype=np.float64)
            return GridFunction2D(spec, "cdf", n, model_fingerprint(models), vals)
    if not fold:
        return GridFunction2D(spec, "cdf", n, model_fingerprint(models), base)
    vecs = [m.pmf_vector() for m in fold]
    vals = np.zeros((spec.n_y, spec.n_z))
    h_y = spec.h_y
    for j in range(spec.n_z):
        cap = _snapped_floor(z[j])
        w = np.ones(1)
        for vec in vecs:
            w = np.convolve(w, vec[: cap + 1])
        col = np.zeros(spec.n_y)
        for s, ws in enumerate(w):
            if ws == 0.0:
                continue
            v = y - s
            if analytic_base is not None:
                col += ws * np.asarray(dcdf_eval(analytic_base, np.minimum(v, z[j])),
                                       dtype=np.float64)
            else:
                pos = v / h_y
                k = np.floor(pos).astype(np.int64)
                inside = (k >= 0) & (k < spec.n_y - 1)
                top = k >= spec.n_y - 1
                contrib = np.zeros(spec.n_y)
                ki = k[inside]
                fr = pos[inside] - ki
                bcol = base[:, j]
                contrib[inside] = bcol[ki] + fr * (bcol[ki + 1] - bcol[ki])
                contrib[top] = bcol[-1]
                col += ws * contrib
        vals[:, j] = col
    np.clip(vals, 0.0, 1.0, out=vals)
    return GridFunction2D(spec, "cdf", n, model_fingerprint(models), vals)


def cdf_mixed_at(models, y, z, spec: GridSpec | None = None):
    """Mixed-kind joint CDF at query points, folding integer masses at the query.

    The mixed CDF jumps where z crosses an integer, so interpolating a folded
    grid across the jump smears it. This evaluates the continuous prefix grid
    (smooth in both arguments, safe to interpolate) and applies the integer
    folds exactly at each query point. Scalar in, scalar out.
    """
    models = list(models)
    if not models:
        raise EngineError("cdf_mixed_at needs at least one model")
    _check_unshifted(models, "cdf_mixed_at")
    cont = [m for m in models if isinstance(m, ContinuousModel)]
    disc = [m for m in models if isinstance(m, DiscreteModel)]
    if len(cont) + len(disc) != len(models):
        raise EngineError("cdf_mixed_at accepts continuous or discrete models only")
    ys = np.atleast_1d(np.asarray(y, dtype=np.float64))
    zs = np.atleast_1d(np.asarray(z, dtype=np.float64))
    ys, zs = np.broadcast_arrays(ys, zs)
    scalar = np.isscalar(y) or (np.ndim(y) == 0 and np.ndim(z) == 0)
    if not cont:
        out = np.array([cdf_recursive_discrete(disc, py, pz)
                        for py, pz in zip(ys.ravel(), zs.ravel())]).reshape(ys.shape)
        return float(out.ravel()[0]) if scalar else out
    if spec is None:
        spec = default_grid_spec(models)
    base_vals = _cdf_grid(cont, spec)
    base = GridFunction2D(spec, "cdf", len(cont), model_fingerprint(cont), base_vals)
    vecs = [m.pmf_vector() for m in disc]
    out = np.empty(ys.size)
    for idx, (py, pz) in enumerate(zip(ys.ravel(), zs.ravel())):
        if py < 0.0 or pz < 0.0:
            out[idx] = 0.0
            continue
        w = np.ones(1)
        cap = _snapped_floor(pz)
        for vec in vecs:
            w = np.convolve(w, vec[: cap + 1])
        acc = 0.0
        for s, ws in enumerate(w):
            if ws == 0.0:
                continue
            v = py - s
            if v < 0.0:
                continue
            # Bilinear interpolation across the z = y ridge is only O(h); on
            # or above the ridge the value equals the diagonal restriction,
            # which every column with z_j >= y_i stores exactly, so push the
            # query one cell into that flat region.
            ze = min(pz, spec.z_max)
            if ze >= v:
                ze = min(v + spec.h_y + spec.h_z, spec.z_max)
            acc += ws * float(base.eval(min(v, spec.y_max), ze))
        out[idx] = min(acc, 1.0)
    out = out.reshape(ys.shape)
    return float(out.ravel()[0]) if scalar else out
