"""Compiled sweeps for the storage equations and their discrete adjoint.

Scheme: integrating-factor Heun in tau for P1, P2, S at every z node.  The
constant diagonal rates (decay and detunings) are propagated exactly by
exp(a dt), so large detunings do not destabilize the explicit step; the
couplings are treated with Heun's predictor-corrector.  The signal field is
rebuilt at each stage by cumulative trapezoidal integration of the
polarization along z.  The reverse sweeps are the exact transpose of
the forward arithmetic, so gradients agree with finite differences to
round-off.

Costate convention: for a real loss L and complex variable x the costate is
dL/dRe(x) + i dL/dIm(x).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _field(e_val, P1, P2, m1g, m2g, h, three, out):
    nz = P1.shape[0]
    out[0] = e_val
    if three:
        prev = m1g * P1[0]
        for j in range(1, nz):
            q = m1g * P1[j]
            out[j] = out[j - 1] + h * (prev + q)
            prev = q
    else:
        prev = m1g * P1[0] + m2g * P2[0]
        for j in range(1, nz):
            q = m1g * P1[j] + m2g * P2[j]
            out[j] = out[j - 1] + h * (prev + q)
            prev = q


@njit(cache=True)
def forward_sweep(e, om, dz, dt, g, m1g, m1s, m2g, m2s, a1, a2, a_s, three, E, P1, P2, S):
    """Fill E, P1, P2, S (n_t, n_z) from zero initial atoms and input ``e``.

    Returns -1 on success or the first time index holding a non-finite value.
    """
    nt, nz = P1.shape
    h = 0.5 * dz * 1j * g
    cg1 = 1j * m1g * g
    cg2 = 1j * m2g * g
    k1a = np.empty(nz, np.complex128)
    k1b = np.empty(nz, np.complex128)
    k1s = np.empty(nz, np.complex128)
    xa = np.empty(nz, np.complex128)
    xb = np.zeros(nz, np.complex128)
    xs = np.empty(nz, np.complex128)
    Es = np.empty(nz, np.complex128)
    c1 = np.exp(a1 * dt)
    c2 = np.exp(a2 * dt)
    c_s = np.exp(a_s * dt)
    hd = 0.5 * dt
    _field(e[0], P1[0], P2[0], m1g, m2g, h, three, E[0])
    for n in range(nt - 1):
        w0 = 1j * om[n]
        w1 = 1j * om[n + 1]
        p1 = P1[n]
        p2 = P2[n]
        s = S[n]
        En = E[n]
        for j in range(nz):
            k1a[j] = m1s * w0 * s[j] + cg1 * En[j]
            k1s[j] = w0 * (m1s * p1[j] + m2s * p2[j])
            xa[j] = c1 * (p1[j] + dt * k1a[j])
            xs[j] = c_s * (s[j] + dt * k1s[j])
        if not three:
            for j in range(nz):
                k1b[j] = m2s * w0 * s[j] + cg2 * En[j]
                xb[j] = c2 * (p2[j] + dt * k1b[j])
        _field(e[n + 1], xa, xb, m1g, m2g, h, three, Es)
        q1 = P1[n + 1]
        q2 = P2[n + 1]
        qs = S[n + 1]
        for j in range(nz):
            k2a = m1s * w1 * xs[j] + cg1 * Es[j]
            k2s = w1 * (m1s * xa[j] + m2s * xb[j])
            q1[j] = c1 * (p1[j] + hd * k1a[j]) + hd * k2a
            qs[j] = c_s * (s[j] + hd * k1s[j]) + hd * k2s
        if not three:
            for j in range(nz):
                k2b = m2s * w1 * xs[j] + cg2 * Es[j]
                q2[j] = c2 * (p2[j] + hd * k1b[j]) + hd * k2b
        _field(e[n + 1], q1, q2, m1g, m2g, h, three, E[n + 1])
        chk = 0.0
        for j in range(nz):
            chk += abs(qs[j]) + abs(q1[j]) + abs(E[n + 1, j])
        if not np.isfinite(chk):
            return n + 1
    return -1


@njit(cache=True)
def _rhs_adjoint(u1, u2, us, y1, y2, ys, om, m1g, m1s, m2g, m2s, g, h, three, b1, b2, bs, cE):
    """Apply the transposed coupling terms at state y to costate u.

    Writes state costates into b1, b2, bs (overwrite), the signal-field
    costate reverse cumulative sums into cE (accumulate), and returns
    (d loss / d omega, d loss / d e).
    """
    nz = u1.shape[0]
    w = 1j * om
    cg = -1j * g
    gom = 0.0
    # signal-field costate per node and its reverse cumulative sum
    r_next = 0.0 + 0.0j
    hc = np.conj(h)
    for j in range(nz - 1, -1, -1):
        if three:
            c = cg * (m1g * u1[j])
        else:
            c = cg * (m1g * u1[j] + m2g * u2[j])
        r = r_next + c
        # Q_j enters E_k for k >= j (as right end) and k >= j+1 (as left end)
        if j >= 1:
            qbar = hc * (r + r_next)
        else:
            qbar = hc * r_next
        b1[j] = -w * m1s * us[j] + m1g * qbar
        if not three:
            b2[j] = -w * m2s * us[j] + m2g * qbar
        bs[j] = -w * (m1s * u1[j] + m2s * u2[j])
        cE[j] += r
        if three:
            gom += (np.conj(u1[j]) * 1j * m1s * ys[j]
                    + np.conj(us[j]) * 1j * (m1s * y1[j])).real
        else:
            gom += (np.conj(u1[j]) * 1j * m1s * ys[j] + np.conj(u2[j]) * 1j * m2s * ys[j]
                    + np.conj(us[j]) * 1j * (m1s * y1[j] + m2s * y2[j])).real
        r_next = r
    return gom, r_next


@njit(cache=True)
def reverse_sweep(e, om, dz, dt, g, m1g, m1s, m2g, m2s, a1, a2, a_s, three, E, P1, P2, S,
                  seed_s, store, L1, L2, LS, LE, ebar, gom):
    """Transpose of :func:`forward_sweep` for the loss ``Re(seed_s^H S[-1])``.

    Fills ``ebar`` (costate of the input samples) and ``gom`` (derivative with
    respect to each omega sample, rad/ns units).  When ``store`` is true the
    costates of P1, P2, S and the reverse-cumulated signal costate are written
    to L1, L2, LS, LE.
    """
    nt, nz = P1.shape
    h = 0.5 * dz * 1j * g
    cg1 = 1j * m1g * g
    cg2 = 1j * m2g * g
    # diagonal rates live in the propagators; the coupling transpose has none
    cc1 = np.conj(np.exp(a1 * dt))
    cc2 = np.conj(np.exp(a2 * dt))
    cc_s = np.conj(np.exp(a_s * dt))
    c1 = np.exp(a1 * dt)
    c2 = np.exp(a2 * dt)
    c_s = np.exp(a_s * dt)
    l1 = np.zeros(nz, np.complex128)
    l2 = np.zeros(nz, np.complex128)
    ls = seed_s.copy()
    u1 = np.empty(nz, np.complex128)
    u2 = np.zeros(nz, np.complex128)
    us = np.empty(nz, np.complex128)
    b1 = np.empty(nz, np.complex128)
    b2 = np.zeros(nz, np.complex128)
    bs = np.empty(nz, np.complex128)
    xa = np.empty(nz, np.complex128)
    xb = np.zeros(nz, np.complex128)
    xs = np.empty(nz, np.complex128)
    cE = np.zeros(nz, np.complex128)
    for i in range(ebar.shape[0]):
        ebar[i] = 0.0
        gom[i] = 0.0
    hd = 0.5 * dt
    for n in range(nt - 2, -1, -1):
        if store:
            for j in range(nz):
                L1[n + 1, j] = l1[j]
                L2[n + 1, j] = l2[j]
                LS[n + 1, j] = ls[j]
        # rebuild the Heun predictor state
        w0 = 1j * om[n]
        p1 = P1[n]
        p2 = P2[n]
        s = S[n]
        En = E[n]
        for j in range(nz):
            k1a = m1s * w0 * s[j] + cg1 * En[j]
            k1s = w0 * (m1s * p1[j] + m2s * p2[j])
            xa[j] = c1 * (p1[j] + dt * k1a)
            xs[j] = c_s * (s[j] + dt * k1s)
        if not three:
            for j in range(nz):
                k1b = m2s * w0 * s[j] + cg2 * En[j]
                xb[j] = c2 * (p2[j] + dt * k1b)
        # stage 2 costate
        for j in range(nz):
            u1[j] = hd * l1[j]
            u2[j] = hd * l2[j]
            us[j] = hd * ls[j]
        gw, er = _rhs_adjoint(u1, u2, us, xa, xb, xs, om[n + 1], m1g, m1s, m2g, m2s,
                              g, h, three, b1, b2, bs, cE)
        gom[n + 1] += gw
        ebar[n + 1] += er
        if store:
            for j in range(nz):
                LE[n + 1, j] = cE[j]
        for j in range(nz):
            cE[j] = 0.0
        # with c* = conj(exp(a dt)): y_n costate gets c* (lambda + Xbar),
        # k1 costate gets c* (hd lambda + dt Xbar)
        for j in range(nz):
            u1[j] = cc1 * (hd * l1[j] + dt * b1[j])
            us[j] = cc_s * (hd * ls[j] + dt * bs[j])
            l1[j] = cc1 * (l1[j] + b1[j])
            ls[j] = cc_s * (ls[j] + bs[j])
        if not three:
            for j in range(nz):
                u2[j] = cc2 * (hd * l2[j] + dt * b2[j])
                l2[j] = cc2 * (l2[j] + b2[j])
        gw, er = _rhs_adjoint(u1, u2, us, p1, p2, s, om[n], m1g, m1s, m2g, m2s,
                              g, h, three, b1, b2, bs, cE)
        gom[n] += gw
        ebar[n] += er
        for j in range(nz):
            l1[j] += b1[j]
            ls[j] += bs[j]
        if not three:
            for j in range(nz):
                l2[j] += b2[j]
    if store:
        for j in range(nz):
            L1[0, j] = l1[j]
            L2[0, j] = l2[j]
            LS[0, j] = ls[j]
            LE[0, j] = cE[j]
    chk = 0.0
    for i in range(ebar.shape[0]):
        chk += abs(ebar[i])
    if not np.isfinite(chk):
        return 0
    return -1


@njit(cache=True)
def _fwm_rhs(p1, s, E, Ep, om, m1g, m1s, a1, a_s, cg1, kap_scale, ls_scale, k1, ks):
    # constant rates a1, a_s are applied by the propagators in fwm_sweep
    kap = kap_scale * om
    dls = ls_scale * om * om
    b1 = -2j * dls
    bs = -1j * dls
    w = 1j * om
    for j in range(p1.shape[0]):
        k1[j] = b1 * p1[j] + m1s * w * s[j] + cg1 * E[j]
        ks[j] = bs * s[j] + w * m1s * p1[j] + 1j * kap * np.conj(Ep[j])


@njit(cache=True)
def _stokes(s, kap, dz, out):
    # dE'/dz = -i kap S with E'(0) = 0
    h = -0.5j * kap * dz
    out[0] = 0.0
    for j in range(1, s.shape[0]):
        out[j] = out[j - 1] + h * (s[j - 1] + s[j])


@njit(cache=True)
def fwm_sweep(e, om, dz, dt, g, m1g, m1s, a1, a_s, kap_scale, ls_scale, S0, E, P1, S, Ep):
    """Three-level sweep with the Stokes field and control light shifts.

    ``S0`` is the initial spin wave; P1 starts empty and ``e`` enters at z = 0.
    The system is linear over the reals only (it couples S to conj(E')).
    Returns -1 or the first non-finite time index.
    """
    nt, nz = P1.shape
    h = 0.5 * dz * 1j * g
    cg1 = 1j * m1g * g
    zero = np.zeros(nz, np.complex128)
    k1a = np.empty(nz, np.complex128)
    k1s = np.empty(nz, np.complex128)
    k2a = np.empty(nz, np.complex128)
    k2s = np.empty(nz, np.complex128)
    xa = np.empty(nz, np.complex128)
    xs = np.empty(nz, np.complex128)
    Es = np.empty(nz, np.complex128)
    Eps = np.empty(nz, np.complex128)
    for j in range(nz):
        P1[0, j] = 0.0
        S[0, j] = S0[j]
    _field(e[0], P1[0], zero, m1g, 0.0, h, True, E[0])
    _stokes(S[0], kap_scale * om[0], dz, Ep[0])
    c1 = np.exp(a1 * dt)
    c_s = np.exp(a_s * dt)
    hd = 0.5 * dt
    for n in range(nt - 1):
        _fwm_rhs(P1[n], S[n], E[n], Ep[n], om[n], m1g, m1s, a1, a_s, cg1, kap_scale, ls_scale,
                 k1a, k1s)
        for j in range(nz):
            xa[j] = c1 * (P1[n, j] + dt * k1a[j])
            xs[j] = c_s * (S[n, j] + dt * k1s[j])
        _field(e[n + 1], xa, zero, m1g, 0.0, h, True, Es)
        _stokes(xs, kap_scale * om[n + 1], dz, Eps)
        _fwm_rhs(xa, xs, Es, Eps, om[n + 1], m1g, m1s, a1, a_s, cg1, kap_scale, ls_scale,
                 k2a, k2s)
        chk = 0.0
        for j in range(nz):
            P1[n + 1, j] = c1 * (P1[n, j] + hd * k1a[j]) + hd * k2a[j]
            S[n + 1, j] = c_s * (S[n, j] + hd * k1s[j]) + hd * k2s[j]
            chk += abs(P1[n + 1, j]) + abs(S[n + 1, j])
        _field(e[n + 1], P1[n + 1], zero, m1g, 0.0, h, True, E[n + 1])
        _stokes(S[n + 1], kap_scale * om[n + 1], dz, Ep[n + 1])
        if not np.isfinite(chk):
            return n + 1
    return -1
