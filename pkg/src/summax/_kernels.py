"""Compiled quadrature kernels for the grid recurrences.

All kernels are single-threaded njit functions; the surrounding engine code
prepares padded, contiguous arrays so the inner loops stay branch-light.
Densities are dispatched by an integer family code so one compiled kernel
serves every model family:

    0 exponential(rate)          p0 = rate
    1 uniform(lower, upper)      p0, p1 = bounds
    2 gamma(shape, rate)         p0, p1
    3 weibull(shape, scale)      p0, p1
    4 tabulated                  tx, td = node and density tables

``off`` translates the density right by off: f(x) is evaluated as base(x - off).
Engines use it to put several variables on a common shift.

Quadrature is composite Simpson with max(8, ceil(len / h_q)) panels where
h_q = min(h_y, h_z) / 2; intervals are clipped to the density's support so
jumps at translated support edges become integration endpoints, and an empty
interval contributes 0.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def conv_trap(a, b, delta):
    """Trapezoid convolution of two densities sampled on one uniform fine grid.

    Returns c with c[r] ~= integral_0^{r delta} a(x) b(r delta - x) dx; c[0]
    is exactly 0, matching the convolution of nonnegative-support densities.
    """
    m = a.size
    out = np.zeros(m)
    for r in range(1, m):
        acc = 0.5 * (a[0] * b[r] + a[r] * b[0])
        for q in range(1, r):
            acc += a[q] * b[r - q]
        out[r] = acc * delta
    return out


@njit(cache=True)
def _support_window(code, p0, p1, tx, off):
    """Support of the translated density f(x - off), as (lo, hi)."""
    if code == 1:
        return off + p0, off + p1
    if code == 4:
        return off + tx[0], off + tx[-1]
    return off, 1e300


@njit(cache=True)
def _pdf_scalar(code, p0, p1, tx, td, off, x):
    t = x - off
    if t < 0.0:
        return 0.0
    if code == 0:
        return p0 * math.exp(-p0 * t)
    if code == 1:
        if p0 <= t <= p1:
            return 1.0 / (p1 - p0)
        return 0.0
    if code == 2:
        if t == 0.0:
            return p1 if p0 == 1.0 else 0.0
        return math.exp(p0 * math.log(p1) + (p0 - 1.0) * math.log(t) - p1 * t - math.lgamma(p0))
    if code == 3:
        if t == 0.0:
            return p0 / p1 if p0 == 1.0 else 0.0
        u = t / p1
        return (p0 / p1) * u ** (p0 - 1.0) * math.exp(-u ** p0)
    # tabulated, linear between nodes, 0 outside
    if t < tx[0] or t > tx[-1]:
        return 0.0
    lo = 0
    hi = tx.size - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if tx[mid] <= t:
            lo = mid
        else:
            hi = mid
    w = (t - tx[lo]) / (tx[lo + 1] - tx[lo])
    return td[lo] * (1.0 - w) + td[lo + 1] * w


@njit(cache=True)
def _g2_scalar(c1, p01, p11, tx1, td1, o1,
               c2, p02, p12, tx2, td2, o2, y, z):
    """Closed-form joint density of (sum, max) of two variables at (y, z).

    Zero outside the wedge z <= y <= 2z; arguments within roundoff of a wedge
    edge are clamped onto it so Simpson endpoints never drop out.
    """
    if z < 0.0:
        return 0.0
    tol = 1e-12 * (1.0 + z)
    u = y - z
    if u < 0.0:
        if u < -tol:
            return 0.0
        u = 0.0
    if u > z:
        if u > z + tol:
            return 0.0
        u = z
    return (_pdf_scalar(c1, p01, p11, tx1, td1, o1, u)
            * _pdf_scalar(c2, p02, p12, tx2, td2, o2, z)
            + _pdf_scalar(c1, p01, p11, tx1, td1, o1, z)
            * _pdf_scalar(c2, p02, p12, tx2, td2, o2, u))


@njit(cache=True)
def pdf_step3_kernel(row_lo, row_hi, n_y, n_z, h_y, h_z, iid,
                     c1, p01, p11, tx1, td1, o1,
                     c2, p02, p12, tx2, td2, o2,
                     c3, p03, p13, tx3, td3, o3):
    """Level-3 density built directly on the closed two-variable density.

    The level-2 density has kinks along its wedge edges, so interpolating it
    from a grid costs an order of accuracy right where the level-3 integrals
    put their limits. Evaluating it pointwise instead makes the level-3 grid
    as accurate as the quadrature. With ``iid`` the self-similar term is
    tripled and the second term skipped; parameters 1..3 then coincide.
    """
    h_q = 0.5 * (h_y if h_y < h_z else h_z)
    out_cols = np.zeros((n_z, n_y))
    s_lo, s_hi = _support_window(c3, p03, p13, tx3, o3)
    if s_lo < 0.0:
        s_lo = 0.0
    for j in range(n_z):
        z = j * h_z
        fz = _pdf_scalar(c3, p03, p13, tx3, td3, o3, z)
        for i in range(row_lo[j], row_hi[j] + 1):
            y = i * h_y
            u = y - z
            if u < 0.0:
                u = 0.0
            total = 0.0
            if fz > 0.0:
                a = 0.5 * u
                b = u if u < z else z
                # near the wedge tip the interval is a fraction of a panel but
                # the integrand is O(1) there; zeroing it would leave holes in
                # the density right where later levels place their limits
                if b - a > 1e-12 * (1.0 + b):
                    npan = int(math.ceil((b - a) / h_q))
                    if npan < 8:
                        npan = 8
                    m = 2 * npan
                    step = (b - a) / m
                    acc = 0.0
                    for t in range(m + 1):
                        x = a + t * step
                        w = 4.0 if t % 2 == 1 else 2.0
                        if t == 0 or t == m:
                            w = 1.0
                        acc += w * _g2_scalar(c1, p01, p11, tx1, td1, o1,
                                              c2, p02, p12, tx2, td2, o2, u, x)
                    total = acc * step / 3.0 * fz
                    if iid:
                        total *= 3.0
            if not iid:
                a2 = y - 2.0 * z
                if a2 < s_lo:
                    a2 = s_lo
                b2 = u if u < z else z
                if b2 > s_hi:
                    b2 = s_hi
                if b2 - a2 > 1e-12 * (1.0 + b2):
                    npan = int(math.ceil((b2 - a2) / h_q))
                    if npan < 8:
                        npan = 8
                    m = 2 * npan
                    step = (b2 - a2) / m
                    acc = 0.0
                    for t in range(m + 1):
                        x = a2 + t * step
                        fv = _pdf_scalar(c3, p03, p13, tx3, td3, o3, x)
                        if fv != 0.0:
                            w = 4.0 if t % 2 == 1 else 2.0
                            if t == 0 or t == m:
                                w = 1.0
                            acc += w * fv * _g2_scalar(c1, p01, p11, tx1, td1, o1,
                                                       c2, p02, p12, tx2, td2, o2,
                                                       y - x, z)
                    total += acc * step / 3.0
            out_cols[j, i] = total
    return out_cols


@njit(cache=True)
def cdf_step_kernel(prev_cols, diag_prev, n_y, n_z, h_y, h_z,
                    code, p0, p1, tx, td, off):
    """One level of the distribution-function recurrence.

    prev_cols holds the previous level transposed, (n_z, n_y + 1), with the
    last column duplicated for padded interpolation. diag_prev is its diagonal
    restriction G(y, y) on the y nodes, padded by one. Returns the new level in
    the same transposed layout plus the new diagonal.

    Nodes below the grid diagonal (y < z) copy the new diagonal value: there
    the joint CDF equals its value at z = y because the max never exceeds the
    sum. Everything else integrates the previous column against the density
    over [0, z] with nodes shared along the column.
    """
    h_q = 0.5 * (h_y if h_y < h_z else h_z)
    out_cols = np.zeros((n_z, n_y))
    diag_new = np.zeros(n_y + 1)
    z_top = (n_z - 1.0) * h_z
    s_lo, s_hi = _support_window(code, p0, p1, tx, off)
    if s_lo < 0.0:
        s_lo = 0.0

    i_diag = int(z_top / h_y + 1e-9) + 2
    if i_diag > n_y:
        i_diag = n_y
    for i in range(i_diag):
        y = i * h_y
        b = y if y < s_hi else s_hi
        if b - s_lo <= 1e-12 * (1.0 + b):
            continue
        npan = int(math.ceil((b - s_lo) / h_q))
        if npan < 8:
            npan = 8
        m = 2 * npan
        step = (b - s_lo) / m
        acc = 0.0
        for t in range(m + 1):
            x = s_lo + t * step
            fv = _pdf_scalar(code, p0, p1, tx, td, off, x)
            if fv != 0.0:
                pos = (y - x) / h_y
                k = int(pos)
                if k > n_y - 1:
                    k = n_y - 1
                fr = pos - k
                gv = diag_prev[k] + fr * (diag_prev[k + 1] - diag_prev[k])
                w = 4.0 if t % 2 == 1 else 2.0
                if t == 0 or t == m:
                    w = 1.0
                acc += w * fv * gv
        diag_new[i] = acc * step / 3.0
    diag_new[n_y] = diag_new[n_y - 1]

    max_pts = 2 * max(8, int(math.ceil(z_top / h_q))) + 1
    fw = np.empty(max_pts)
    q_int = np.empty(max_pts, np.int64)
    q_fr = np.empty(max_pts)
    for j in range(n_z):
        z = j * h_z
        col = prev_cols[j]
        # rows with y <= z, the node on the diagonal included, copy the
        # diagonal restriction so the flat region is flat to the last bit
        i_start = int(math.floor(z / h_y + 1e-9)) + 1
        if i_start > n_y:
            i_start = n_y
        for i in range(i_start):
            out_cols[j, i] = diag_new[i]
        b = z if z < s_hi else s_hi
        if b - s_lo <= 1e-12 * (1.0 + b):
            continue
        npan = int(math.ceil((b - s_lo) / h_q))
        if npan < 8:
            npan = 8
        m = 2 * npan
        step = (b - s_lo) / m
        for t in range(m + 1):
            x = s_lo + t * step
            w = 4.0 if t % 2 == 1 else 2.0
            if t == 0 or t == m:
                w = 1.0
            fw[t] = w * _pdf_scalar(code, p0, p1, tx, td, off, x) * step / 3.0
            pos = x / h_y
            c = int(math.ceil(pos - 1e-12))
            q_int[t] = c
            q_fr[t] = c - pos
        for i in range(i_start, n_y):
            acc = 0.0
            for t in range(m + 1):
                k = i - q_int[t]
                if k < 0:
                    k = 0
                acc += fw[t] * (col[k] + q_fr[t] * (col[k + 1] - col[k]))
            out_cols[j, i] = acc
    return out_cols, diag_new


@njit(cache=True)
def _drop_close_kinks(cells, pos, vals, nk):
    """Remove reconstruction entries whose neighbor slopes cross another kink.

    The two-piece rebuild reads two cells on each side; kinks closer than
    three cells to each other would feed it mixed slopes, so both fall back
    to plain interpolation.
    """
    w = 0
    for q in range(nk):
        ok = True
        for r in range(nk):
            if r != q:
                d = cells[q] - cells[r]
                if -3 < d < 3:
                    ok = False
        if ok:
            cells[w] = cells[q]
            pos[w] = pos[q]
            vals[w] = vals[q]
            w += 1
    return w


@njit(cache=True)
def _row_kinks(row, s, level, h_z, n_z, cells, pos, vals):
    """Kink-cell reconstruction table for one extended row of the previous level.

    The previous density restricted to sum s is a piecewise-linear-ish tent in
    its max coordinate with kinks at s/m; entries are (cell, position, rebuilt
    kink value), filtered as in _drop_close_kinks.
    """
    nk = 0
    for mm in range(2, level - 1):
        q = s / (mm * h_z)
        kc = int(q)
        if kc < 1 or kc > n_z - 3 or nk >= 8:
            continue
        if q - kc < 1e-9 or kc + 1.0 - q < 1e-9:
            continue
        vl = row[kc] + (q - kc) * (row[kc] - row[kc - 1])
        vr = row[kc + 1] - (kc + 1.0 - q) * (row[kc + 2] - row[kc + 1])
        cells[nk] = kc
        pos[nk] = q
        vals[nk] = 0.5 * (vl + vr)
        nk += 1
    nk = _drop_close_kinks(cells, pos, vals, nk)
    # the tent feet at s/(level-1) and s are exact zeros of the density;
    # pinning them beats any slope rebuilt from extension data
    for q in (s / ((level - 1.0) * h_z), s / h_z):
        kc = int(q)
        if kc < 0 or kc > n_z - 1 or nk >= 8:
            continue
        if q - kc < 1e-9 or kc + 1.0 - q < 1e-9:
            continue
        cells[nk] = kc
        pos[nk] = q
        vals[nk] = 0.0
        nk += 1
    return nk


@njit(cache=True)
def pdf_step_kernel(prev_rows, prev_cols, row_lo, row_hi, level,
                    n_y, n_z, h_y, h_z, iid,
                    code, p0, p1, tx, td, off):
    """One level of the density recurrence, from level-1 variables to level.

    prev_rows is the extended previous density, (n_y + 1, n_z + 1) with edge
    padding; prev_cols its transpose. row_lo/row_hi bound the output wedge per
    column. With ``iid`` the single self-similar term is scaled by ``level``
    and the second term is skipped; otherwise the density parameters describe
    the level-th variable and both terms are accumulated.

    Nodes with y <= 2z are left at 0: there the cap never binds and the
    caller fills the exact product form instead (the wedge is narrower than
    a grid cell near its tip, where no interpolation of the previous level
    can resolve the integrand).
    """
    h_q = 0.5 * (h_y if h_y < h_z else h_z)
    out_cols = np.zeros((n_z, n_y))
    km1 = level - 1.0
    s_lo, s_hi = _support_window(code, p0, p1, tx, off)
    if s_lo < 0.0:
        s_lo = 0.0
    kink_cell = np.empty(8, np.int64)
    kink_pos = np.empty(8)
    kink_val = np.empty(8)
    ka_cell = np.empty(8, np.int64)
    ka_pos = np.empty(8)
    ka_val = np.empty(8)
    kb_cell = np.empty(8, np.int64)
    kb_pos = np.empty(8)
    kb_val = np.empty(8)
    for j in range(n_z):
        z = j * h_z
        fz = _pdf_scalar(code, p0, p1, tx, td, off, z)
        colj = prev_cols[j]
        nk = 0
        if not iid and z > 0.0:
            # the previous density kinks along s = m*z; rebuild the two linear
            # pieces inside each kink cell from the neighbor slopes, so the
            # second term does not smear the ridge across a whole cell
            for mm in range(2, level - 1):
                spos = mm * z / h_y
                kc = int(spos)
                if kc < 1 or kc > n_y - 3 or nk >= 8:
                    continue
                if spos - kc < 1e-9 or kc + 1.0 - spos < 1e-9:
                    continue
                vl = colj[kc] + (spos - kc) * (colj[kc] - colj[kc - 1])
                vr = colj[kc + 1] - (kc + 1.0 - spos) * (colj[kc + 2] - colj[kc + 1])
                kink_cell[nk] = kc
                kink_pos[nk] = spos
                kink_val[nk] = 0.5 * (vl + vr)
                nk += 1
            nk = _drop_close_kinks(kink_cell, kink_pos, kink_val, nk)
            # the column meets its support edges at s = z and s = (level-1) z
            # with exact zero density; pin those kinks outright
            for spos in (z / h_y, (level - 1.0) * z / h_y):
                kc = int(spos)
                if kc < 0 or kc > n_y - 1 or nk >= 8:
                    continue
                if spos - kc < 1e-9 or kc + 1.0 - spos < 1e-9:
                    continue
                kink_cell[nk] = kc
                kink_pos[nk] = spos
                kink_val[nk] = 0.0
                nk += 1
        i_seam = int(math.floor(2.0 * z / h_y + 1e-9))
        i_from = row_lo[j]
        if i_from <= i_seam:
            i_from = i_seam + 1
        for i in range(i_from, row_hi[j] + 1):
            y = i * h_y
            u = y - z
            if u < 0.0:
                u = 0.0
            total = 0.0
            if fz > 0.0:
                # integrate the previous level over its max coordinate at sum u.
                # The two bracketing rows are sampled at the same coordinate
                # RELATIVE to their own support (x * row_sum / u): the previous
                # level's kinks sit at fixed fractions of the sum, so blending
                # raw-coordinate samples would interpolate across a moving kink
                # and lose an order of accuracy along every ridge.
                a = u / km1
                b = u if u < z else z
                if b - a > 1e-12 * (1.0 + b):
                    npan = int(math.ceil((b - a) / h_q))
                    if npan < 8:
                        npan = 8
                    m = 2 * npan
                    step = (b - a) / m
                    pu = u / h_y
                    ku = int(pu)
                    if ku > n_y - 1:
                        ku = n_y - 1
                    fu = pu - ku
                    row_a = prev_rows[ku]
                    row_b = prev_rows[ku + 1]
                    sa = ku * h_y / u
                    sb = (ku + 1) * h_y / u
                    nka = _row_kinks(row_a, ku * h_y, level, h_z, n_z,
                                     ka_cell, ka_pos, ka_val)
                    nkb = _row_kinks(row_b, (ku + 1) * h_y, level, h_z, n_z,
                                     kb_cell, kb_pos, kb_val)
                    acc = 0.0
                    for t in range(m + 1):
                        x = a + t * step
                        pz = x * sa / h_z
                        kz = int(pz)
                        if kz > n_z - 1:
                            kz = n_z - 1
                        fr = pz - kz
                        va = row_a[kz] + fr * (row_a[kz + 1] - row_a[kz])
                        for q in range(nka):
                            if kz == ka_cell[q]:
                                c = ka_pos[q]
                                vs = ka_val[q]
                                if pz <= c:
                                    va = row_a[kz] + (pz - kz) / (c - kz) * (vs - row_a[kz])
                                else:
                                    va = vs + (pz - c) / (kz + 1.0 - c) * (row_a[kz + 1] - vs)
                                break
                        pz = x * sb / h_z
                        kz = int(pz)
                        if kz > n_z - 1:
                            kz = n_z - 1
                        fr = pz - kz
                        vb = row_b[kz] + fr * (row_b[kz + 1] - row_b[kz])
                        for q in range(nkb):
                            if kz == kb_cell[q]:
                                c = kb_pos[q]
                                vs = kb_val[q]
                                if pz <= c:
                                    vb = row_b[kz] + (pz - kz) / (c - kz) * (vs - row_b[kz])
                                else:
                                    vb = vs + (pz - c) / (kz + 1.0 - c) * (row_b[kz + 1] - vs)
                                break
                        w = 4.0 if t % 2 == 1 else 2.0
                        if t == 0 or t == m:
                            w = 1.0
                        acc += w * (va + fu * (vb - va))
                    total = acc * step / 3.0 * fz
                    if iid:
                        total *= level
            if not iid:
                # integrate the density against the previous level at fixed max z
                a2 = y - km1 * z
                if a2 < s_lo:
                    a2 = s_lo
                b2 = u if u < z else z
                if b2 > s_hi:
                    b2 = s_hi
                if b2 - a2 > 1e-12 * (1.0 + b2):
                    npan = int(math.ceil((b2 - a2) / h_q))
                    if npan < 8:
                        npan = 8
                    m = 2 * npan
                    step = (b2 - a2) / m
                    acc = 0.0
                    for t in range(m + 1):
                        x = a2 + t * step
                        fv = _pdf_scalar(code, p0, p1, tx, td, off, x)
                        if fv != 0.0:
                            pos = (y - x) / h_y
                            k = int(pos)
                            if k > n_y - 1:
                                k = n_y - 1
                            fr = pos - k
                            v = colj[k] + fr * (colj[k + 1] - colj[k])
                            for q in range(nk):
                                if k == kink_cell[q]:
                                    c = kink_pos[q]
                                    vs = kink_val[q]
                                    if pos <= c:
                                        v = colj[k] + (pos - k) / (c - k) * (vs - colj[k])
                                    else:
                                        v = vs + (pos - c) / (k + 1.0 - c) * (colj[k + 1] - vs)
                                    break
                            w = 4.0 if t % 2 == 1 else 2.0
                            if t == 0 or t == m:
                                w = 1.0
                            acc += w * fv * v
                    total += acc * step / 3.0
            out_cols[j, i] = total
    return out_cols
