# cython: language_level=3
"""Compiled flight of one rocket tube member to apogee.

Mirrors ``madsnmpc.ocp.simulate`` plus ``madsnmpc.integrator`` for the
augmented rocket state ``(h, v, m, l, v_viol)``: same Dormand-Prince tableau,
step controller, restart at switching times and event bisection, so the two
backends agree to rounding.
"""

from libc.math cimport exp, fabs, pow, isfinite, isnan, INFINITY, M_PI
from libc.stdlib cimport malloc, free

cdef enum:
    N = 5

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40

cdef double SAFETY = 0.9, FAC_MIN = 0.2, FAC_MAX = 5.0
cdef double PI_BETA = 0.04
cdef double PI_ALPHA = 0.2 - 0.75 * 0.04
cdef double EVENT_REL_TOL = 1e-10

cdef double RHO0 = 1.225, SCALE_HEIGHT = 8500.0, G0 = 9.80665, R_EARTH = 6.371e6

# status codes, see madsnmpc._backend.STATUS
cdef enum:
    OK = 0
    NO_EVENT = 1
    UNDERFLOW = 2
    TOO_MANY_STEPS = 3
    BAD_MASS = 4


cdef struct Model:
    double thrust
    double cd
    double ve
    double diameter
    double vlimit


cdef struct Tol:
    double atol
    double rtol
    double h0
    double hmax
    double hmin
    long max_steps


cdef inline int rhs(Model* md, double* z, double* dz) noexcept nogil:
    cdef double h = z[0], v = z[1], m = z[2]
    cdef double rho, r, g, area, drag
    if not m > 0.0:
        return BAD_MASS
    rho = RHO0 * exp(-h / SCALE_HEIGHT)
    r = R_EARTH / (R_EARTH + h)
    g = G0 * r * r
    area = M_PI * md.diameter * md.diameter / 4.0
    drag = 0.5 * md.cd * rho * area * v * fabs(v)
    dz[0] = v
    dz[1] = (md.thrust - drag) / m - g
    dz[2] = -md.thrust / md.ve
    dz[3] = 0.0
    dz[4] = v - md.vlimit if v - md.vlimit > 0.0 else 0.0
    return OK


cdef int step(Model* md, double* y, double h, double* k1,
              double* y5, double* k7, double* err) noexcept nogil:
    cdef double k2[N]
    cdef double k3[N]
    cdef double k4[N]
    cdef double k5[N]
    cdef double k6[N]
    cdef double w[N]
    cdef int i, s
    for i in range(N):
        w[i] = y[i] + h * (A21 * k1[i])
    s = rhs(md, w, k2)
    if s != OK:
        return s
    for i in range(N):
        w[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    s = rhs(md, w, k3)
    if s != OK:
        return s
    for i in range(N):
        w[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    s = rhs(md, w, k4)
    if s != OK:
        return s
    for i in range(N):
        w[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    s = rhs(md, w, k5)
    if s != OK:
        return s
    for i in range(N):
        w[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    s = rhs(md, w, k6)
    if s != OK:
        return s
    for i in range(N):
        y5[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    s = rhs(md, y5, k7)
    if s != OK:
        return s
    for i in range(N):
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
    return OK


cdef inline bint crossed(double before, double after) noexcept nogil:
    return before > 0.0 and 0.0 >= after


cdef int fly_piece(Model* md, Tol* tol, double* z, double* t_io, double t_end,
                   bint* fired) noexcept nogil:
    """Integrate ``z`` from ``t_io[0]`` to ``t_end`` or the falling zero of ``v``."""
    cdef double t = t_io[0]
    cdef double k1[N]
    cdef double y5[N]
    cdef double k7[N]
    cdef double err[N]
    cdef double ym[N]
    cdef double yh[N]
    cdef double g_prev, g_new, h_ctrl, err_prev, remaining, h, ratio, q, sc, fac, t_new
    cdef double lo, hi, mid, btol
    cdef bint rejected = False, last, finite
    cdef long attempts = 0
    cdef int i, s

    s = rhs(md, z, k1)
    if s != OK:
        return s
    for i in range(N):
        if not isfinite(k1[i]):
            return UNDERFLOW
    g_prev = z[1]
    h_ctrl = tol.h0 if tol.h0 < tol.hmax else tol.hmax
    err_prev = 1e-4

    while t < t_end:
        attempts += 1
        if attempts > tol.max_steps:
            return TOO_MANY_STEPS
        remaining = t_end - t
        last = False
        h = h_ctrl
        if h >= remaining:
            h = remaining
            last = True
        elif remaining - h < tol.hmin:
            h = 0.5 * remaining
            if h < tol.hmin:
                h = remaining
                last = True

        s = step(md, z, h, k1, y5, k7, err)
        if s != OK:
            return s
        finite = True
        for i in range(N):
            if not (isfinite(y5[i]) and isfinite(k7[i])):
                finite = False
        if finite:
            ratio = 0.0
            for i in range(N):
                sc = tol.atol + tol.rtol * (fabs(z[i]) if fabs(z[i]) >= fabs(y5[i]) else fabs(y5[i]))
                q = fabs(err[i]) / sc
                if isnan(q):
                    ratio = INFINITY
                    break
                if q > ratio:
                    ratio = q
            if not isfinite(ratio):
                ratio = INFINITY
        else:
            ratio = INFINITY

        if ratio <= 1.0:
            t_new = t_end if last else t + h
            g_new = y5[1]
            if crossed(g_prev, g_new):
                lo = 0.0
                hi = h
                for i in range(N):
                    yh[i] = y5[i]
                btol = EVENT_REL_TOL * h
                while hi - lo > btol:
                    mid = 0.5 * (lo + hi)
                    s = step(md, z, mid, k1, ym, k7, err)
                    if s != OK:
                        return s
                    if crossed(g_prev, ym[1]):
                        hi = mid
                        for i in range(N):
                            yh[i] = ym[i]
                    else:
                        lo = mid
                for i in range(N):
                    z[i] = yh[i]
                t_io[0] = t + hi
                fired[0] = True
                return OK
            g_prev = g_new
            t = t_new
            for i in range(N):
                z[i] = y5[i]
                k1[i] = k7[i]
            if ratio == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * pow(ratio, -PI_ALPHA) * pow(err_prev, PI_BETA)
                fac = FAC_MAX if FAC_MAX < (FAC_MIN if FAC_MIN > fac else fac) else (FAC_MIN if FAC_MIN > fac else fac)
            if rejected:
                fac = fac if fac < 1.0 else 1.0
            err_prev = ratio if ratio > 1e-4 else 1e-4
            h_ctrl = h * fac
            if h_ctrl > tol.hmax:
                h_ctrl = tol.hmax
            rejected = False
        else:
            if not isfinite(ratio):
                fac = FAC_MIN
            else:
                fac = SAFETY * pow(ratio, -0.2)
                if fac < FAC_MIN:
                    fac = FAC_MIN
            h_ctrl = h * fac
            rejected = True
        if h_ctrl < tol.hmin and t < t_end:
            return UNDERFLOW

    t_io[0] = t
    return OK


cdef int fly_c(double* levels, int n_levels, double* switches, int n_switches,
               Model* md, Tol* tol, double m0, double t_max,
               double* z, double* t_out) noexcept nogil:
    cdef double* edges = <double*> malloc((n_switches + 2) * sizeof(double))
    cdef double* sorted_sw = <double*> malloc((n_switches + 1) * sizeof(double))
    cdef int n_edges, i, j, count, s = OK, n_sorted = 0
    cdef double a, b, tmp, t, accel
    cdef bint fired = False
    cdef double dz[N]

    for i in range(N):
        z[i] = 0.0
    z[2] = m0

    # liftoff check at t = 0 with the right-continuous input
    count = 0
    for j in range(n_switches):
        if switches[j] <= 0.0:
            count += 1
    md.thrust = levels[count]
    s = rhs(md, z, dz)
    if s != OK:
        free(edges)
        free(sorted_sw)
        return s
    if z[1] <= 0.0 and dz[1] <= 0.0:
        t_out[0] = 0.0
        free(edges)
        free(sorted_sw)
        return OK

    # distinct interior switching times in increasing order
    for i in range(n_switches):
        if 0.0 < switches[i] < t_max:
            sorted_sw[n_sorted] = switches[i]
            n_sorted += 1
    for i in range(1, n_sorted):
        tmp = sorted_sw[i]
        j = i - 1
        while j >= 0 and sorted_sw[j] > tmp:
            sorted_sw[j + 1] = sorted_sw[j]
            j -= 1
        sorted_sw[j + 1] = tmp
    edges[0] = 0.0
    n_edges = 1
    for i in range(n_sorted):
        if sorted_sw[i] != edges[n_edges - 1]:
            edges[n_edges] = sorted_sw[i]
            n_edges += 1
    edges[n_edges] = t_max
    n_edges += 1

    t = 0.0
    for i in range(n_edges - 1):
        a = edges[i]
        b = edges[i + 1]
        count = 0
        for j in range(n_switches):
            if switches[j] <= a:
                count += 1
        md.thrust = levels[count]
        t = a
        s = fly_piece(md, tol, z, &t, b, &fired)
        if s != OK or fired:
            break
    free(edges)
    free(sorted_sw)
    if s != OK:
        return s
    t_out[0] = t
    if not fired:
        return NO_EVENT
    return OK


def fly(double[::1] levels, double[::1] switches, double cd, double ve, double diameter,
        double m0, double vlimit, double t_max, double atol, double rtol, double h0,
        double hmax, double hmin, long max_steps):
    """Return ``(status, t_final, h, v, m, velocity_violation)`` for one member."""
    cdef Model md
    cdef Tol tol
    cdef double z[N]
    cdef double t_out = 0.0
    cdef int status
    if levels.shape[0] != switches.shape[0] + 1:
        raise ValueError("need exactly one switching time fewer than levels")
    md.thrust = 0.0
    md.cd = cd
    md.ve = ve
    md.diameter = diameter
    md.vlimit = vlimit
    tol.atol = atol
    tol.rtol = rtol
    tol.h0 = h0
    tol.hmax = hmax
    tol.hmin = hmin
    tol.max_steps = max_steps
    with nogil:
        status = fly_c(&levels[0], levels.shape[0],
                       &switches[0] if switches.shape[0] > 0 else NULL,
                       switches.shape[0], &md, &tol, m0, t_max, z, &t_out)
    return status, t_out, z[0], z[1], z[2], z[4]
