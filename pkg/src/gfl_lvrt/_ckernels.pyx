# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of :mod:`gfl_lvrt._pykernels`; keep the two in lockstep."""
from libc.math cimport sqrt, fabs, sin, cos, atan2, remainder, M_PI

cdef double SCAN_MAX = 3.0
cdef int SCAN_POINTS = 600

cdef int OK = 0
cdef int SCANNED = 1
cdef int NO_SOLUTION = -1
cdef int LABEL_STABLE = 0
cdef int LABEL_LOS = 1
cdef int LABEL_NOSOL = 2


cdef inline void law_refs_c(double m, double Imax, double Kq, double Ulow, double Icd_ref,
                            double *d, double *q) noexcept nogil:
    cdef double qq, d2, dd
    if m < Ulow - Imax / Kq:
        d[0] = 0.0
        q[0] = -Imax
        return
    qq = -Kq * (Ulow - m)
    if qq > 0.0:
        qq = 0.0
    elif qq < -Imax:
        qq = -Imax
    d2 = Imax * Imax - qq * qq
    dd = sqrt(d2) if d2 > 0.0 else 0.0
    if dd > Icd_ref:
        dd = Icd_ref
    d[0] = dd
    q[0] = qq


def law_refs(double m, double Imax, double Kq, double Ulow, double Icd_ref):
    cdef double d, q
    law_refs_c(m, Imax, Kq, Ulow, Icd_ref, &d, &q)
    return d, q


cdef inline double trad_map(double m, double ur, double ui, double zr, double zi,
                            double c, double s, double Imax, double Kq, double Ulow,
                            double Icd_ref) noexcept nogil:
    cdef double d, q, ir, ii, vr, vi
    law_refs_c(m, Imax, Kq, Ulow, Icd_ref, &d, &q)
    ir = d * c - q * s
    ii = d * s + q * c
    vr = ur + zr * ir - zi * ii
    vi = ui + zr * ii + zi * ir
    return sqrt(vr * vr + vi * vi)


cdef inline double dec_resid(double m, double Uabs2, double zr, double zi, double Imax,
                             double Kq, double Ulow, double Icd_ref) noexcept nogil:
    cdef double d, q, wr, wi
    law_refs_c(m, Imax, Kq, Ulow, Icd_ref, &d, &q)
    wr = m - (zr * d - zi * q)
    wi = -(zr * q + zi * d)
    return wr * wr + wi * wi - Uabs2


cdef inline double resid(int law, double m, double ur, double ui, double zr, double zi,
                         double c, double s, double Uabs2, double Imax, double Kq,
                         double Ulow, double Icd_ref) noexcept nogil:
    if law == 1:
        return trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m
    return dec_resid(m, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref)


cdef double scan(int law, double m_prev, double ur, double ui, double zr, double zi,
                 double c, double s, double Uabs2, double Imax, double Kq, double Ulow,
                 double Icd_ref) noexcept nogil:
    cdef double best = -1.0, best_dist = 1e300
    cdef double h = SCAN_MAX / SCAN_POINTS
    cdef double m0 = 0.0, m1, g1, gm1, root, a, b, ga, mid, gmid, dist
    cdef double g0 = resid(law, m0, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref)
    cdef int k, it
    gm1 = g0
    for k in range(1, SCAN_POINTS + 1):
        m1 = k * h
        g1 = resid(law, m1, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref)
        root = -1.0
        if g0 == 0.0:
            root = m0
        elif g0 * g1 < 0.0:
            a = m0
            b = m1
            ga = g0
            for it in range(80):
                mid = 0.5 * (a + b)
                gmid = resid(law, mid, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref)
                if gmid == 0.0:
                    a = mid
                    b = mid
                    break
                if (gmid < 0.0) == (ga < 0.0):
                    a = mid
                    ga = gmid
                else:
                    b = mid
                if b - a < 1e-15:
                    break
            root = 0.5 * (a + b)
        elif law == 2 and k >= 2 and fabs(g0) < 1e-18 and fabs(g0) <= fabs(gm1) and fabs(g0) <= fabs(g1):
            root = m0
        if root >= 0.0:
            dist = fabs(root - m_prev)
            if dist < best_dist:
                best = root
                best_dist = dist
        gm1 = g0
        m0 = m1
        g0 = g1
    return best


cdef int solve_loop_c(int law, double ur, double ui, double zr, double zi, double delta,
                      double m_prev, double phi_prev, double Imax, double Kq, double Ulow,
                      double Icd_ref, double Icq_ref, double tol, int maxit,
                      double *m_out, double *phi_out, double *id_out,
                      double *iq_out) noexcept nogil:
    cdef double c = cos(delta), s = sin(delta)
    cdef double ir, ii, vr, vi, Uabs2, m, f, m_new, m0, g0, m1, g1, den, m2
    cdef double m_a, m_b, gm, ga, d, q, wr, wi, phi, tv, ct, st
    cdef int status = OK, k
    cdef bint converged = False
    if law == 0:
        ir = Icd_ref * c - Icq_ref * s
        ii = Icd_ref * s + Icq_ref * c
        vr = ur + zr * ir - zi * ii
        vi = ui + zr * ii + zi * ir
        m_out[0] = sqrt(vr * vr + vi * vi)
        phi_out[0] = atan2(vi, vr)
        id_out[0] = Icd_ref
        iq_out[0] = Icq_ref
        return OK

    Uabs2 = ur * ur + ui * ui
    m = m_prev if m_prev >= 0.0 else 1.0
    if law == 1:
        for k in range(maxit):
            f = trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref)
            m_new = 0.5 * m + 0.5 * f
            if fabs(m_new - m) < tol:
                m = m_new
                converged = True
                break
            m = m_new
    else:
        m0 = m
        g0 = dec_resid(m0, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref)
        m1 = m0 + 1e-4
        for k in range(maxit):
            g1 = dec_resid(m1, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref)
            if fabs(g1) < 1e-15:
                converged = True
                break
            den = g1 - g0
            if den == 0.0:
                break
            m2 = m1 - g1 * (m1 - m0) / den
            if m2 < 0.0 or m2 > SCAN_MAX or m2 != m2:
                break
            m0 = m1
            g0 = g1
            m1 = m2
            if fabs(m1 - m0) < tol * 1e-2:
                g1 = dec_resid(m1, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref)
                converged = fabs(g1) < 1e-12
                break
        m = m1
        if converged and fabs(m - m_prev) > 0.25 and m_prev >= 0.0:
            converged = False

    if converged and law == 1:
        g0 = trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m
        m_a = m + 1e-7
        for k in range(6):
            g1 = trad_map(m_a, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m_a
            if fabs(g1) < 1e-15:
                m = m_a
                break
            den = g1 - g0
            if den == 0.0:
                break
            m_b = m_a - g1 * (m_a - m) / den
            if fabs(m_b - m) > 1e-6:
                break
            m = m_a
            g0 = g1
            m_a = m_b
        gm = trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m
        ga = trad_map(m_a, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m_a
        if fabs(ga) < fabs(gm):
            m = m_a

    if not converged:
        m = scan(law, m_prev, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref)
        if m < 0.0:
            m_out[0] = -1.0
            phi_out[0] = 0.0
            id_out[0] = 0.0
            iq_out[0] = 0.0
            return NO_SOLUTION
        status = SCANNED

    law_refs_c(m, Imax, Kq, Ulow, Icd_ref, &d, &q)
    m_out[0] = m
    if law == 1:
        ir = d * c - q * s
        ii = d * s + q * c
        vr = ur + zr * ir - zi * ii
        vi = ui + zr * ii + zi * ir
        phi_out[0] = atan2(vi, vr)
        id_out[0] = d
        iq_out[0] = q
        return status
    wr = m - (zr * d - zi * q)
    wi = -(zr * q + zi * d)
    if Uabs2 > 1e-30 and (wr * wr + wi * wi) > 1e-30:
        phi = atan2(ui, ur) - atan2(wi, wr)
    else:
        phi = phi_prev
    tv = phi - delta
    ct = cos(tv)
    st = sin(tv)
    phi_out[0] = phi
    id_out[0] = d * ct - q * st
    iq_out[0] = q * ct + d * st
    return status


def solve_loop(int law, double ur, double ui, double zr, double zi, double delta,
               double m_prev, double phi_prev, double Imax, double Kq, double Ulow,
               double Icd_ref, double Icq_ref, double tol, int maxit):
    cdef double m, phi, i_d, i_q
    cdef int st = solve_loop_c(law, ur, ui, zr, zi, delta, m_prev, phi_prev, Imax, Kq,
                               Ulow, Icd_ref, Icq_ref, tol, maxit, &m, &phi, &i_d, &i_q)
    return m, phi, i_d, i_q, st


cdef inline int loop_uq(int law, double ur, double ui, double zr, double zi, double delta,
                        double *m, double *phi, double Imax, double Kq, double Ulow,
                        double Icd_ref, double Icq_ref, double *uq) noexcept nogil:
    cdef double mm, pp, i_d, i_q
    cdef int st = solve_loop_c(law, ur, ui, zr, zi, delta, m[0], phi[0], Imax, Kq, Ulow,
                               Icd_ref, Icq_ref, 1e-10, 200, &mm, &pp, &i_d, &i_q)
    if st >= 0:
        m[0] = mm
        phi[0] = pp
        uq[0] = mm * sin(pp - delta)
    return st


cdef int integrate_node(double ur, double ui, double zr, double zi, double Imax, double Kq,
                        double Ulow, double Icd_ref, double Icq_ref, double hyst, int mode,
                        double Kp, double Ki, double delta_ep, double m_ep, double d0,
                        double w0, double dt, int n_steps, double tol_delta,
                        double tol_omega) noexcept nogil:
    cdef double two_pi = 2.0 * M_PI
    cdef int active = 1, law = mode, st, k
    cdef double m = m_ep, phi = d0, uq, u2, u3, u4, d, x, w, err
    cdef double k1d, k1x, k2d, k2x, k3d, k3x, k4d, k4x
    st = loop_uq(law, ur, ui, zr, zi, d0, &m, &phi, Imax, Kq, Ulow, Icd_ref, Icq_ref, &uq)
    if st < 0:
        return LABEL_NOSOL
    d = d0
    x = w0 - Kp * uq
    for k in range(n_steps):
        k1d = Kp * uq + x
        k1x = Ki * uq
        st = loop_uq(law, ur, ui, zr, zi, d + 0.5 * dt * k1d, &m, &phi, Imax, Kq, Ulow,
                     Icd_ref, Icq_ref, &u2)
        if st < 0:
            return LABEL_NOSOL
        k2d = Kp * u2 + x + 0.5 * dt * k1x
        k2x = Ki * u2
        st = loop_uq(law, ur, ui, zr, zi, d + 0.5 * dt * k2d, &m, &phi, Imax, Kq, Ulow,
                     Icd_ref, Icq_ref, &u3)
        if st < 0:
            return LABEL_NOSOL
        k3d = Kp * u3 + x + 0.5 * dt * k2x
        k3x = Ki * u3
        st = loop_uq(law, ur, ui, zr, zi, d + dt * k3d, &m, &phi, Imax, Kq, Ulow,
                     Icd_ref, Icq_ref, &u4)
        if st < 0:
            return LABEL_NOSOL
        k4d = Kp * u4 + x + dt * k3x
        k4x = Ki * u4
        d += dt * (k1d + 2.0 * k2d + 2.0 * k3d + k4d) / 6.0
        x += dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
        if fabs(d - delta_ep) > two_pi:
            return LABEL_LOS
        st = loop_uq(law, ur, ui, zr, zi, d, &m, &phi, Imax, Kq, Ulow, Icd_ref, Icq_ref, &uq)
        if st < 0:
            return LABEL_NOSOL
        if active:
            if m >= Ulow + hyst:
                active = 0
                law = 0
                st = loop_uq(law, ur, ui, zr, zi, d, &m, &phi, Imax, Kq, Ulow, Icd_ref,
                             Icq_ref, &uq)
        elif m < Ulow:
            active = 1
            law = mode
            st = loop_uq(law, ur, ui, zr, zi, d, &m, &phi, Imax, Kq, Ulow, Icd_ref,
                         Icq_ref, &uq)
            if st < 0:
                return LABEL_NOSOL
        w = Kp * uq + x
        err = remainder(d - delta_ep, two_pi)
        if fabs(err) < 1e-4 and fabs(w) < 1e-4:
            return LABEL_STABLE
    w = Kp * uq + x
    err = remainder(d - delta_ep, two_pi)
    if fabs(err) < tol_delta and fabs(w) < tol_omega:
        return LABEL_STABLE
    return LABEL_LOS


def stability_grid(double ur, double ui, double zr, double zi, double Imax, double Kq,
                   double Ulow, double Icd_ref, double Icq_ref, double hyst, int mode,
                   double Kp, double Ki, double delta_ep, double m_ep, offsets, omegas,
                   double dt, int n_steps, double tol_delta, double tol_omega):
    cdef list labels = []
    cdef double off, w0
    for off in offsets:
        for w0 in omegas:
            labels.append(integrate_node(ur, ui, zr, zi, Imax, Kq, Ulow, Icd_ref, Icq_ref,
                                         hyst, mode, Kp, Ki, delta_ep, m_ep,
                                         delta_ep + off, w0, dt, n_steps, tol_delta,
                                         tol_omega))
    return labels
