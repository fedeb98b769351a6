# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled geodesic kernels for the normal and Gumbel families.

Same contract as the numpy fallback in ``_pykernels``: one geodesic per row,
invalid states end that row with status 1 instead of raising.
"""

import numpy as np

from libc.math cimport exp, log, log1p, sqrt, expm1, fabs, fmax, fmin, isfinite, M_PI
from scipy.special.cython_special cimport log_ndtr

cdef double LOG_SQRT_2PI = 0.5 * log(2.0 * M_PI)
cdef double LOG_MASS_FLOOR = log(1e-300)
cdef double SQRT_EPS = sqrt(2.220446049250313e-16)
cdef double SPEED_LIMIT2 = 1e16
cdef double TAIL = 70.0
cdef double LOG_TAIL = log(70.0)

# kind codes
NORMAL = 0
TRUNC_NORMAL = 1
GUMBEL = 2
TRUNC_GUMBEL = 3

ctypedef struct Ctx:
    int kind
    double a
    double b
    double c11
    double c12
    double c22
    const double* xq
    const double* wq
    int nq
    double h
    double floor


# ---------------------------------------------------------------- truncated normal

cdef inline double tn_log_mass(double al, double be) noexcept nogil:
    cdef double lo, hi, lhi, llo
    if al > 0:
        lo = -be
        hi = -al
    else:
        lo = al
        hi = be
    lhi = log_ndtr(hi)
    llo = log_ndtr(lo)
    return lhi + log(-expm1(llo - lhi))


cdef int tn_geom(Ctx* c, double mu, double s, double* g, double* G) noexcept nogil:
    """Metric (g11, g12, g22) and, if G != NULL, closed-form symbols G[k*4+i*2+j]."""
    cdef double a = c.a, b = c.b
    if not (isfinite(mu) and isfinite(s)) or s < c.floor:
        return 1
    cdef double al = (a - mu) / s, be = (b - mu) / s
    cdef double lz = tn_log_mass(al, be)
    if not (lz >= LOG_MASS_FLOOR):
        return 1
    cdef double base = -LOG_SQRT_2PI - log(s) - lz
    cdef double qa = exp(base - 0.5 * al * al)
    cdef double qb = exp(base - 0.5 * be * be)
    cdef double ua = a - mu, ub = b - mu
    cdef double s2 = s * s, s3 = s2 * s, s4 = s2 * s2
    cdef double Q0 = qb - qa
    cdef double Q1 = ub * qb - ua * qa
    cdef double cm_a = ua / s2 + Q0, cm_b = ub / s2 + Q0
    cdef double cs_a = Q1 / s - 1 / s + ua * ua / s3
    cdef double cs_b = Q1 / s - 1 / s + ub * ub / s3
    cdef double dmq_a = qa * cm_a, dmq_b = qb * cm_b
    cdef double dsq_a = qa * cs_a, dsq_b = qb * cs_b
    cdef double Dm = dmq_b - dmq_a
    cdef double Ds = dsq_b - dsq_a
    cdef double UDs = ub * dsq_b - ua * dsq_a

    cdef double mean = mu - s2 * Q0
    cdef double dmu = mu - mean
    cdef double dm_mean = 1 - s2 * Dm
    cdef double ds_mean = -2 * s * Q0 - s2 * Ds
    cdef double dm_var = -s2 * ((-qb + ub * dmq_b) - (-qa + ua * dmq_a)) - 2 * dmu * (1 - dm_mean)
    cdef double ds_var = 2 * s * (1 - Q1) - s2 * UDs + 2 * dmu * ds_mean
    cdef double g11 = dm_mean / s2
    cdef double g12 = ds_mean / s2
    cdef double g22 = (ds_var + 2 * (mean - mu) * ds_mean) / (s2 * s)
    g[0] = g11
    g[1] = g12
    g[2] = g22
    if G == NULL:
        return 0 if (isfinite(g11) and isfinite(g12) and isfinite(g22)) else 1

    cdef double dmmq_a = dmq_a * cm_a + qa * (-1 / s2 + Dm)
    cdef double dmmq_b = dmq_b * cm_b + qb * (-1 / s2 + Dm)
    cdef double dsmq_a = dsq_a * cm_a + qa * (-2 * ua / s3 + Ds)
    cdef double dsmq_b = dsq_b * cm_b + qb * (-2 * ub / s3 + Ds)
    cdef double tail = -Q1 / s2 + UDs / s + 1 / s2
    cdef double dssq_a = dsq_a * cs_a + qa * (tail - 3 * ua * ua / s4)
    cdef double dssq_b = dsq_b * cs_b + qb * (tail - 3 * ub * ub / s4)
    cdef double dmm_mean = -s2 * (dmmq_b - dmmq_a)
    cdef double dsm_mean = -2 * s * Dm - s2 * (dsmq_b - dsmq_a)
    cdef double dss_mean = -2 * Q0 - 4 * s * Ds - s2 * (dssq_b - dssq_a)
    cdef double dmm_var = (-s2 * ((-2 * dmq_b + ub * dmmq_b) - (-2 * dmq_a + ua * dmmq_a))
                           - 2 * (1 - dm_mean) * (1 - dm_mean) + 2 * dmu * dmm_mean)
    cdef double dsm_var = (-2 * s * ((-qb + ub * dmq_b) - (-qa + ua * dmq_a))
                           - s2 * ((-dsq_b + ub * dsmq_b) - (-dsq_a + ua * dsmq_a))
                           + 2 * ds_mean * (1 - dm_mean) + 2 * dsm_mean * dmu)
    cdef double dss_var = (2 * (1 - Q1) - 4 * s * UDs - s2 * (ub * dssq_b - ua * dssq_a)
                           - 2 * ds_mean * ds_mean + 2 * dmu * dss_mean)

    cdef double d = mean - mu
    cdef double m1 = dm_mean, ms = ds_mean
    # first kind [ij,k], averaged over the two dual connections
    cdef double f[2][2][2]
    f[0][0][0] = 0.5 * (0.0 + dmm_mean / s2)
    f[0][0][1] = 0.5 * (0.0 + (dmm_var + 2 * d * dmm_mean + 2 * m1 * m1) / s3)
    f[0][1][0] = 0.5 * (-2 * m1 / s3 + dsm_mean / s2)
    f[0][1][1] = 0.5 * (-2 * ms / s3 + (dsm_var + 2 * d * dsm_mean + 2 * ms * m1) / s3)
    f[1][1][0] = 0.5 * (-3 / s4 * (dm_var + 2 * m1 * d) + dss_mean / s2)
    f[1][1][1] = 0.5 * (-3 / s4 * (ds_var + 2 * ms * d) + (dss_var + 2 * d * dss_mean + 2 * ms * ms) / s3)
    f[1][0][0] = f[0][1][0]
    f[1][0][1] = f[0][1][1]
    cdef double det = g11 * g22 - g12 * g12
    cdef double inv[2][2]
    inv[0][0] = g22 / det
    inv[0][1] = -g12 / det
    inv[1][0] = -g12 / det
    inv[1][1] = g11 / det
    cdef int i, j, k
    for i in range(2):
        for j in range(2):
            for k in range(2):
                G[k * 4 + i * 2 + j] = f[i][j][0] * inv[0][k] + f[i][j][1] * inv[1][k]
    return 0


# ---------------------------------------------------------------- Gumbel

cdef inline double pdf_std(double z) noexcept nogil:
    return exp(-z - exp(-z))


cdef int gumbel_fim(Ctx* c, double m, double s, double* g) noexcept nogil:
    if not (isfinite(m) and isfinite(s)) or s < c.floor:
        return 1
    cdef double s2 = s * s
    g[0] = c.c11 / s2
    g[1] = c.c12 / s2
    g[2] = c.c22 / s2
    return 0


cdef int tg_fim(Ctx* c, double m, double s, double* g) noexcept nogil:
    if not (isfinite(m) and isfinite(s)) or s < c.floor:
        return 1
    cdef double za = (c.a - m) / s, zb = (c.b - m) / s
    cdef double ea = exp(-za), eb = exp(-zb)
    cdef double lN = -eb + log(-expm1(eb - ea))
    if not (lN >= LOG_MASS_FLOOR):
        return 1
    cdef double N = exp(lN)
    # same window as gumbel.quad_window
    cdef double zs = fmin(fmax(0.0, za), zb)
    cdef double t = -zs if -zs > LOG_TAIL else LOG_TAIL
    cdef double lo = fmax(za, -(t + log1p(exp(-fabs(zs + LOG_TAIL)))))
    cdef double hi = fmin(zb, zs + TAIL)
    cdef double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo)
    cdef double E_e = 0, E_ez = 0, E_ez2 = 0, E_1me = 0, E_z1me = 0
    cdef double z, e, w
    cdef int q
    for q in range(c.nq):
        z = mid + half * c.xq[q]
        e = exp(-z)
        w = (half / N) * c.wq[q] * exp(-z - e)
        E_e += w * e
        E_ez += w * e * z
        E_ez2 += w * e * z * z
        E_1me += w * (1.0 - e)
        E_z1me += w * z * (1.0 - e)
    cdef double s2 = s * s
    cdef double h_mm = E_e / s2
    cdef double h_ms = (E_ez + E_1me) / s2
    cdef double h_ss = (E_ez2 + 2.0 * E_z1me) / s2
    cdef double fa = pdf_std(za), fb = pdf_std(zb)
    cdef double dfa = -fa * (1 - ea), dfb = -fb * (1 - eb)
    cdef double dm_ = -1.0 / s
    cdef double ds_a = -za / s, ds_b = -zb / s
    cdef double Nm = fb * dm_ - fa * dm_
    cdef double Ns = fb * ds_b - fa * ds_a
    cdef double Nmm = dfb * dm_ * dm_ - dfa * dm_ * dm_
    cdef double Nms = dfb * dm_ * ds_b + fb / s2 - (dfa * dm_ * ds_a + fa / s2)
    cdef double Nss = dfb * ds_b * ds_b + fb * 2 * zb / s2 - (dfa * ds_a * ds_a + fa * 2 * za / s2)
    g[0] = h_mm + (Nmm / N - Nm * Nm / (N * N))
    g[1] = h_ms + (Nms / N - Nm * Ns / (N * N))
    g[2] = h_ss - 1.0 / s2 + (Nss / N - Ns * Ns / (N * N))
    return 0 if (isfinite(g[0]) and isfinite(g[1]) and isfinite(g[2])) else 1


cdef inline int fim_kind(Ctx* c, double x0, double x1, double* g) noexcept nogil:
    if c.kind == 2:
        return gumbel_fim(c, x0, x1, g)
    return tg_fim(c, x0, x1, g)


cdef int fd_geom(Ctx* c, double* th, double* g, double* G) noexcept nogil:
    """Symbols from central differences of the metric."""
    cdef double gp[3]
    cdef double gm[3]
    cdef double dg[2][2][2]  # [l][i][j]
    cdef double hl, x0, x1
    cdef int l
    if fim_kind(c, th[0], th[1], g):
        return 1
    for l in range(2):
        hl = fmax(c.h, SQRT_EPS * fabs(th[l]))
        x0 = th[0] + (hl if l == 0 else 0.0)
        x1 = th[1] + (hl if l == 1 else 0.0)
        if fim_kind(c, x0, x1, gp):
            return 1
        x0 = th[0] - (hl if l == 0 else 0.0)
        x1 = th[1] - (hl if l == 1 else 0.0)
        if fim_kind(c, x0, x1, gm):
            return 1
        dg[l][0][0] = (gp[0] - gm[0]) / (2.0 * hl)
        dg[l][0][1] = (gp[1] - gm[1]) / (2.0 * hl)
        dg[l][1][0] = dg[l][0][1]
        dg[l][1][1] = (gp[2] - gm[2]) / (2.0 * hl)
    cdef double det = g[0] * g[2] - g[1] * g[1]
    cdef double inv[2][2]
    inv[0][0] = g[2] / det
    inv[1][1] = g[0] / det
    inv[0][1] = -g[1] / det
    inv[1][0] = -g[1] / det
    cdef double first[2][2][2]
    cdef int i, j, k, m
    cdef double acc
    for i in range(2):
        for j in range(2):
            for m in range(2):
                first[i][j][m] = 0.5 * (dg[i][j][m] + dg[j][i][m] - dg[m][i][j])
    for k in range(2):
        for i in range(2):
            for j in range(2):
                acc = 0.0
                for m in range(2):
                    acc = acc + inv[k][m] * first[i][j][m]
                G[k * 4 + i * 2 + j] = acc
    return 0


cdef int geom(Ctx* c, double* th, double* g, double* G) noexcept nogil:
    cdef int rc, k
    cdef double s
    if c.kind == 0:
        s = th[1]
        if not (isfinite(th[0]) and isfinite(s)) or s < c.floor:
            return 1
        g[0] = 1.0 / (s * s)
        g[1] = 0.0
        g[2] = 2.0 / (s * s)
        for k in range(8):
            G[k] = 0.0
        G[0 * 4 + 0 * 2 + 1] = -1.0 / s
        G[0 * 4 + 1 * 2 + 0] = -1.0 / s
        G[1 * 4 + 0 * 2 + 0] = 1.0 / (2.0 * s)
        G[1 * 4 + 1 * 2 + 1] = -1.0 / s
        return 0
    if c.kind == 1:
        rc = tn_geom(c, th[0], th[1], g, G)
    else:
        rc = fd_geom(c, th, g, G)
    if rc:
        return rc
    # indefinite metric: cancellation far from the data scale
    if not (g[0] > 0 and g[0] * g[2] - g[1] * g[1] > 0):
        return 1
    for k in range(8):
        if not isfinite(G[k]):
            return 1
    return 0


cdef inline void accel(double* G, double* v, double* out) noexcept nogil:
    cdef int k
    for k in range(2):
        out[k] = -(G[k * 4 + 0] * v[0] * v[0] + G[k * 4 + 1] * v[0] * v[1]
                   + G[k * 4 + 2] * v[1] * v[0] + G[k * 4 + 3] * v[1] * v[1])


cdef void run_one(Ctx* c, const double* th0, const double* v0, long steps, double dt, int method,
                  const long* record, long R, double* pos, double* vel, double* speed,
                  signed char* status, long* blow) noexcept nogil:
    cdef double th[2]
    cdef double v[2]
    cdef double g[3]
    cdef double G[8]
    cdef double G2[8]
    cdef double a1[2]
    cdef double a2[2]
    cdef double a3[2]
    cdef double a4[2]
    cdef double x2[2]
    cdef double u2[2]
    cdef double x3[2]
    cdef double u3[2]
    cdef double x4[2]
    cdef double u4[2]
    cdef double gs[3]
    cdef double sp2, half = 0.5 * dt
    cdef long n, r = 0
    cdef int q
    th[0] = th0[0]
    th[1] = th0[1]
    v[0] = v0[0]
    v[1] = v0[1]
    status[0] = 0
    blow[0] = -1
    for n in range(steps + 1):
        if geom(c, th, g, G) or not (isfinite(v[0]) and isfinite(v[1])):
            status[0] = 1
            blow[0] = n
            return
        sp2 = g[0] * v[0] * v[0] + 2.0 * g[1] * v[0] * v[1] + g[2] * v[1] * v[1]
        if not (sp2 <= SPEED_LIMIT2):
            status[0] = 1
            blow[0] = n
            return
        if r < R and record[r] == n:
            pos[2 * r] = th[0]
            pos[2 * r + 1] = th[1]
            vel[2 * r] = v[0]
            vel[2 * r + 1] = v[1]
            speed[r] = sqrt(sp2)
            r += 1
        if n == steps:
            return
        accel(G, v, a1)
        if method == 0:
            th[0] = th[0] + dt * v[0]
            th[1] = th[1] + dt * v[1]
            v[0] = v[0] + dt * a1[0]
            v[1] = v[1] + dt * a1[1]
            continue
        for q in range(2):
            x2[q] = th[q] + half * v[q]
            u2[q] = v[q] + half * a1[q]
        if geom(c, x2, gs, G2):
            status[0] = 1
            blow[0] = n + 1
            return
        accel(G2, u2, a2)
        for q in range(2):
            x3[q] = th[q] + half * u2[q]
            u3[q] = v[q] + half * a2[q]
        if geom(c, x3, gs, G2):
            status[0] = 1
            blow[0] = n + 1
            return
        accel(G2, u3, a3)
        for q in range(2):
            x4[q] = th[q] + dt * u3[q]
            u4[q] = v[q] + dt * a3[q]
        if geom(c, x4, gs, G2):
            status[0] = 1
            blow[0] = n + 1
            return
        accel(G2, u4, a4)
        for q in range(2):
            th[q] = th[q] + (dt / 6.0) * (v[q] + 2.0 * u2[q] + 2.0 * u3[q] + u4[q])
            v[q] = v[q] + (dt / 6.0) * (a1[q] + 2.0 * a2[q] + 2.0 * a3[q] + a4[q])


def integrate_range(int kind, const double[::1] params, const double[:, ::1] theta0,
                    const double[:, ::1] v0, long steps, double dt, int method,
                    const long[::1] record, const double[::1] xq, const double[::1] wq, double h, double floor,
                    double[:, :, ::1] pos, double[:, :, ::1] vel, double[:, ::1] speed,
                    signed char[::1] status, long[::1] blow, long k0, long k1):
    """Integrate rows ``k0:k1`` in place; releases the GIL.

    ``params`` is ``(a, b, c11, c12, c22)``: truncation bounds and the Gumbel
    scale-free constants (unused entries ignored).
    """
    cdef Ctx c
    c.kind = kind
    c.a = params[0]
    c.b = params[1]
    c.c11 = params[2]
    c.c12 = params[3]
    c.c22 = params[4]
    c.xq = &xq[0]
    c.wq = &wq[0]
    c.nq = xq.shape[0]
    c.h = h
    c.floor = floor
    cdef long R = record.shape[0]
    cdef long k
    with nogil:
        for k in range(k0, k1):
            run_one(&c, &theta0[k, 0], &v0[k, 0], steps, dt, method, &record[0], R,
                    &pos[k, 0, 0], &vel[k, 0, 0], &speed[k, 0], &status[k], &blow[k])


def geometry_point(int kind, const double[::1] params, double x0, double x1,
                   const double[::1] xq, const double[::1] wq, double h, double floor):
    """``(G[2,2,2], g[2,2], ok)`` at one point, for tests and the benchmark."""
    cdef Ctx c
    c.kind = kind
    c.a = params[0]
    c.b = params[1]
    c.c11 = params[2]
    c.c12 = params[3]
    c.c22 = params[4]
    c.xq = &xq[0]
    c.wq = &wq[0]
    c.nq = xq.shape[0]
    c.h = h
    c.floor = floor
    cdef double th[2]
    cdef double g[3]
    cdef double G[8]
    th[0] = x0
    th[1] = x1
    cdef int rc = geom(&c, th, g, G)
    Gs = np.array([G[k] for k in range(8)]).reshape(2, 2, 2)
    gm = np.array([[g[0], g[1]], [g[1], g[2]]])
    return Gs, gm, rc == 0
