"""Pure-Python kernels; the compiled module ``_ckernels`` mirrors these exactly.

Conventions shared by both implementations
------------------------------------------
* ``law``: 0 normal (fixed references), 1 traditional LVRT, 2 decoupled LVRT.
* The network is ``u = U + Z*i`` with ``i`` in converter per-unit, so ``Z``
  already carries the converter/system base ratio.
* Status codes: 0 converged, 1 fallback scan used, -1 no solution.
"""
import math

OK = 0
SCANNED = 1
NO_SOLUTION = -1

LABEL_STABLE = 0
LABEL_LOS = 1
LABEL_NOSOL = 2

SCAN_MAX = 3.0
SCAN_POINTS = 600


def law_refs(m, Imax, Kq, Ulow, Icd_ref):
    """Reactive-priority references along the voltage axis."""
    if m < Ulow - Imax / Kq:
        return 0.0, -Imax
    q = -Kq * (Ulow - m)
    if q > 0.0:
        q = 0.0
    elif q < -Imax:
        q = -Imax
    d2 = Imax * Imax - q * q
    d = math.sqrt(d2) if d2 > 0.0 else 0.0
    if d > Icd_ref:
        d = Icd_ref
    return d, q


def _trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref):
    d, q = law_refs(m, Imax, Kq, Ulow, Icd_ref)
    ir = d * c - q * s
    ii = d * s + q * c
    vr = ur + zr * ir - zi * ii
    vi = ui + zr * ii + zi * ir
    return math.sqrt(vr * vr + vi * vi)


def _dec_resid(m, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref):
    d, q = law_refs(m, Imax, Kq, Ulow, Icd_ref)
    wr = m - (zr * d - zi * q)
    wi = -(zr * q + zi * d)
    return wr * wr + wi * wi - Uabs2


def _resid(law, m, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref):
    if law == 1:
        return _trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m
    return _dec_resid(m, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref)


def _scan(law, m_prev, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref):
    """Every sign change (and near-touching minimum) on [0, SCAN_MAX]; nearest to m_prev."""
    best = -1.0
    best_dist = 1e300
    h = SCAN_MAX / SCAN_POINTS
    m0 = 0.0
    g0 = _resid(law, m0, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref)
    gm1 = g0
    for k in range(1, SCAN_POINTS + 1):
        m1 = k * h
        g1 = _resid(law, m1, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref)
        root = -1.0
        if g0 == 0.0:
            root = m0
        elif g0 * g1 < 0.0:
            a, b, ga = m0, m1, g0
            for _ in range(80):
                mid = 0.5 * (a + b)
                gmid = _resid(law, mid, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref)
                if gmid == 0.0:
                    a = b = mid
                    break
                if (gmid < 0.0) == (ga < 0.0):
                    a, ga = mid, gmid
                else:
                    b = mid
                if b - a < 1e-15:
                    break
            root = 0.5 * (a + b)
        elif law == 2 and k >= 2 and abs(g0) < 1e-18 and abs(g0) <= abs(gm1) and abs(g0) <= abs(g1):
            root = m0
        if root >= 0.0:
            dist = abs(root - m_prev)
            if dist < best_dist:
                best, best_dist = root, dist
        gm1, m0, g0 = g0, m1, g1
    return best


def solve_loop(law, ur, ui, zr, zi, delta, m_prev, phi_prev,
               Imax, Kq, Ulow, Icd_ref, Icq_ref, tol, maxit):
    """Solve the converter/network loop for the PCC voltage.

    Returns ``(m, phi, i_d, i_q, status)``: magnitude and angle of ``u`` and
    the current references in the PLL frame.
    """
    c = math.cos(delta)
    s = math.sin(delta)
    if law == 0:
        ir = Icd_ref * c - Icq_ref * s
        ii = Icd_ref * s + Icq_ref * c
        vr = ur + zr * ir - zi * ii
        vi = ui + zr * ii + zi * ir
        return math.sqrt(vr * vr + vi * vi), math.atan2(vi, vr), Icd_ref, Icq_ref, OK

    Uabs2 = ur * ur + ui * ui
    status = OK
    m = m_prev if m_prev >= 0.0 else 1.0
    converged = False
    if law == 1:
        for _ in range(maxit):
            f = _trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref)
            m_new = 0.5 * m + 0.5 * f
            if abs(m_new - m) < tol:
                m = m_new
                converged = True
                break
            m = m_new
    else:
        # secant on the decoupled magnitude condition
        m0 = m
        g0 = _dec_resid(m0, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref)
        m1 = m0 + 1e-4
        for _ in range(maxit):
            g1 = _dec_resid(m1, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref)
            if abs(g1) < 1e-15:
                converged = True
                break
            den = g1 - g0
            if den == 0.0:
                break
            m2 = m1 - g1 * (m1 - m0) / den
            if m2 < 0.0 or m2 > SCAN_MAX or m2 != m2:
                break
            m0, g0, m1 = m1, g1, m2
            if abs(m1 - m0) < tol * 1e-2:
                g1 = _dec_resid(m1, Uabs2, zr, zi, Imax, Kq, Ulow, Icd_ref)
                converged = abs(g1) < 1e-12
                break
        m = m1
        if converged and abs(m - m_prev) > 0.25 and m_prev >= 0.0:
            # a distant root; let the scan pick the branch nearest m_prev
            converged = False

    if converged and law == 1:
        # secant polish of the fixed point
        g0 = _trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m
        m_a = m + 1e-7
        for _ in range(6):
            g1 = _trad_map(m_a, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m_a
            if abs(g1) < 1e-15:
                m = m_a
                break
            den = g1 - g0
            if den == 0.0:
                break
            m_b = m_a - g1 * (m_a - m) / den
            if abs(m_b - m) > 1e-6:
                break
            m, g0, m_a = m_a, g1, m_b
        gm = _trad_map(m, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m
        ga = _trad_map(m_a, ur, ui, zr, zi, c, s, Imax, Kq, Ulow, Icd_ref) - m_a
        if abs(ga) < abs(gm):
            m = m_a

    if not converged:
        m = _scan(law, m_prev, ur, ui, zr, zi, c, s, Uabs2, Imax, Kq, Ulow, Icd_ref)
        if m < 0.0:
            return -1.0, 0.0, 0.0, 0.0, NO_SOLUTION
        status = SCANNED

    d, q = law_refs(m, Imax, Kq, Ulow, Icd_ref)
    if law == 1:
        ir = d * c - q * s
        ii = d * s + q * c
        vr = ur + zr * ir - zi * ii
        vi = ui + zr * ii + zi * ir
        return m, math.atan2(vi, vr), d, q, status
    # decoupled: e^{j phi} (m - Z r') = U
    wr = m - (zr * d - zi * q)
    wi = -(zr * q + zi * d)
    if Uabs2 > 1e-30 and (wr * wr + wi * wi) > 1e-30:
        phi = math.atan2(ui, ur) - math.atan2(wi, wr)
    else:
        phi = phi_prev
    tv = phi - delta
    ct = math.cos(tv)
    st = math.sin(tv)
    return m, phi, d * ct - q * st, q * ct + d * st, status


def _loop_uq(law, ur, ui, zr, zi, delta, m_prev, phi_prev,
             Imax, Kq, Ulow, Icd_ref, Icq_ref):
    m, phi, _, _, st = solve_loop(law, ur, ui, zr, zi, delta, m_prev, phi_prev,
                                  Imax, Kq, Ulow, Icd_ref, Icq_ref, 1e-10, 200)
    return m, phi, m * math.sin(phi - delta), st


def stability_grid(ur, ui, zr, zi, Imax, Kq, Ulow, Icd_ref, Icq_ref, hyst,
                   mode, Kp, Ki, delta_ep, m_ep, offsets, omegas,
                   dt, n_steps, tol_delta, tol_omega):
    """Label every initial (delta offset, omega) pair by integrating the reduced loop.

    ``mode`` is 1 (traditional) or 2 (decoupled) while LVRT is active; LVRT
    starts active and exits above ``Ulow + hyst``.  Returns a flat list of
    labels, offsets varying slowest.
    """
    labels = []
    two_pi = 2.0 * math.pi
    for off in offsets:
        for w0 in omegas:
            labels.append(_integrate_node(ur, ui, zr, zi, Imax, Kq, Ulow, Icd_ref, Icq_ref,
                                          hyst, mode, Kp, Ki, delta_ep, m_ep,
                                          delta_ep + off, w0, dt, n_steps,
                                          tol_delta, tol_omega, two_pi))
    return labels


def _integrate_node(ur, ui, zr, zi, Imax, Kq, Ulow, Icd_ref, Icq_ref, hyst, mode,
                    Kp, Ki, delta_ep, m_ep, d0, w0, dt, n_steps, tol_delta, tol_omega, two_pi):
    active = 1
    law = mode
    m = m_ep
    phi = d0
    m, phi, uq, st = _loop_uq(law, ur, ui, zr, zi, d0, m, phi, Imax, Kq, Ulow, Icd_ref, Icq_ref)
    if st < 0:
        return LABEL_NOSOL
    d = d0
    x = w0 - Kp * uq
    for _ in range(n_steps):
        # RK4 on (delta, x_i) with algebraic re-solve per stage
        k1d = Kp * uq + x
        k1x = Ki * uq
        m, phi, u2, st = _loop_uq(law, ur, ui, zr, zi, d + 0.5 * dt * k1d, m, phi,
                                  Imax, Kq, Ulow, Icd_ref, Icq_ref)
        if st < 0:
            return LABEL_NOSOL
        k2d = Kp * u2 + x + 0.5 * dt * k1x
        k2x = Ki * u2
        m, phi, u3, st = _loop_uq(law, ur, ui, zr, zi, d + 0.5 * dt * k2d, m, phi,
                                  Imax, Kq, Ulow, Icd_ref, Icq_ref)
        if st < 0:
            return LABEL_NOSOL
        k3d = Kp * u3 + x + 0.5 * dt * k2x
        k3x = Ki * u3
        m, phi, u4, st = _loop_uq(law, ur, ui, zr, zi, d + dt * k3d, m, phi,
                                  Imax, Kq, Ulow, Icd_ref, Icq_ref)
        if st < 0:
            return LABEL_NOSOL
        k4d = Kp * u4 + x + dt * k3x
        k4x = Ki * u4
        d += dt * (k1d + 2.0 * k2d + 2.0 * k3d + k4d) / 6.0
        x += dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
        if abs(d - delta_ep) > two_pi:
            return LABEL_LOS
        m, phi, uq, st = _loop_uq(law, ur, ui, zr, zi, d, m, phi,
                                  Imax, Kq, Ulow, Icd_ref, Icq_ref)
        if st < 0:
            return LABEL_NOSOL
        if active:
            if m >= Ulow + hyst:
                active = 0
                law = 0
                m, phi, uq, st = _loop_uq(law, ur, ui, zr, zi, d, m, phi,
                                          Imax, Kq, Ulow, Icd_ref, Icq_ref)
        elif m < Ulow:
            active = 1
            law = mode
            m, phi, uq, st = _loop_uq(law, ur, ui, zr, zi, d, m, phi,
                                      Imax, Kq, Ulow, Icd_ref, Icq_ref)
            if st < 0:
                return LABEL_NOSOL
        w = Kp * uq + x
        err = math.remainder(d - delta_ep, two_pi)
        if abs(err) < 1e-4 and abs(w) < 1e-4:
            return LABEL_STABLE
    w = Kp * uq + x
    err = math.remainder(d - delta_ep, two_pi)
    if abs(err) < tol_delta and abs(w) < tol_omega:
        return LABEL_STABLE
    return LABEL_LOS
