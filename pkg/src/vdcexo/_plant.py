"""Compiled kernels for the chain (plant dynamics and controller sweeps).

Plain-array signatures so numba can compile them; the readable reference
implementations live in :mod:`vdcexo.chain` and :mod:`vdcexo.body` and the
test-suite checks these kernels against them.

Transforms are passed as rotation/offset pairs and applied in place with
scalar code: at 6x6 size, temporary allocations and BLAS calls would cost
more than the arithmetic.  Kernel geometry arguments are always
``axes, R0, p0, Rl, pl`` (joint axis index, fixed joint rotation/offset,
link rotation/offset).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _joint_rotation(R0, axis, angle, out):
    """``out = R0 @ rot(axis, angle)``."""
    c = np.cos(angle)
    s = np.sin(angle)
    # columns i1, i2 span the rotation plane
    i1 = (axis + 1) % 3
    i2 = (axis + 2) % 3
    for a in range(3):
        out[a, axis] = R0[a, axis]
        out[a, i1] = c * R0[a, i1] + s * R0[a, i2]
        out[a, i2] = -s * R0[a, i1] + c * R0[a, i2]


@njit(cache=True)
def _matmul3(A, B, out):
    for a in range(3):
        for b in range(3):
            out[a, b] = A[a, 0] * B[0, b] + A[a, 1] * B[1, b] + A[a, 2] * B[2, b]


@njit(cache=True)
def _to_child(R, r, src, dst):
    """Motion vector into the child frame: ``dst = U^T src``."""
    w0, w1, w2 = src[3], src[4], src[5]
    t0 = src[0] - (r[1] * w2 - r[2] * w1)
    t1 = src[1] - (r[2] * w0 - r[0] * w2)
    t2 = src[2] - (r[0] * w1 - r[1] * w0)
    for a in range(3):
        dst[a] = R[0, a] * t0 + R[1, a] * t1 + R[2, a] * t2
        dst[3 + a] = R[0, a] * w0 + R[1, a] * w1 + R[2, a] * w2


@njit(cache=True)
def _to_parent(R, r, src, dst):
    """Force vector into the parent frame: ``dst = U src``."""
    f = np.empty(3)
    m = np.empty(3)
    for a in range(3):
        f[a] = R[a, 0] * src[0] + R[a, 1] * src[1] + R[a, 2] * src[2]
        m[a] = R[a, 0] * src[3] + R[a, 1] * src[4] + R[a, 2] * src[5]
    dst[0], dst[1], dst[2] = f[0], f[1], f[2]
    dst[3] = m[0] + r[1] * f[2] - r[2] * f[1]
    dst[4] = m[1] + r[2] * f[0] - r[0] * f[2]
    dst[5] = m[2] + r[0] * f[1] - r[1] * f[0]


@njit(cache=True)
def _mass_mul(p, x, out):
    """``out = M(phi) x``."""
    m, hx, hy, hz = p[0], p[1], p[2], p[3]
    v0, v1, v2, w0, w1, w2 = x[0], x[1], x[2], x[3], x[4], x[5]
    # linear: m v - h x w ; angular: h x v + I w
    out[0] = m * v0 - (hy * w2 - hz * w1)
    out[1] = m * v1 - (hz * w0 - hx * w2)
    out[2] = m * v2 - (hx * w1 - hy * w0)
    out[3] = hy * v2 - hz * v1 + p[4] * w0 + p[7] * w1 + p[9] * w2
    out[4] = hz * v0 - hx * v2 + p[7] * w0 + p[5] * w1 + p[8] * w2
    out[5] = hx * v1 - hy * v0 + p[9] * w0 + p[8] * w1 + p[6] * w2


@njit(cache=True)
def _net_wrench(p, A, V, R, g_world, fd, out):
    """``M A + V x* (M V) + G + fd`` with gravity rotated by ``R^T``."""
    MV = np.empty(6)
    _mass_mul(p, V, MV)
    _mass_mul(p, A, out)
    v0, v1, v2, w0, w1, w2 = V[0], V[1], V[2], V[3], V[4], V[5]
    out[0] += w1 * MV[2] - w2 * MV[1]
    out[1] += w2 * MV[0] - w0 * MV[2]
    out[2] += w0 * MV[1] - w1 * MV[0]
    out[3] += w1 * MV[5] - w2 * MV[4] + v1 * MV[2] - v2 * MV[1]
    out[4] += w2 * MV[3] - w0 * MV[5] + v2 * MV[0] - v0 * MV[2]
    out[5] += w0 * MV[4] - w1 * MV[3] + v0 * MV[1] - v1 * MV[0]
    g0 = R[0, 0] * g_world[0] + R[1, 0] * g_world[1] + R[2, 0] * g_world[2]
    g1 = R[0, 1] * g_world[0] + R[1, 1] * g_world[1] + R[2, 1] * g_world[2]
    g2 = R[0, 2] * g_world[0] + R[1, 2] * g_world[1] + R[2, 2] * g_world[2]
    out[0] += -p[0] * g0 + fd[0]
    out[1] += -p[0] * g1 + fd[1]
    out[2] += -p[0] * g2 + fd[2]
    out[3] += -(p[2] * g2 - p[3] * g1) + fd[3]
    out[4] += -(p[3] * g0 - p[1] * g2) + fd[4]
    out[5] += -(p[1] * g1 - p[2] * g0) + fd[5]


@njit(cache=True)
def kinematics(axes, R0, p0, Rl, pl, q, qd):
    """Body velocities, velocity-product accelerations, Jacobians, world rotations.

    Returns ``V (n,6)``, ``Abias (n,6)`` (body accelerations at ``qdd = 0``),
    ``J (n,6,n)`` body Jacobians and ``Rw (n,3,3)`` world orientation of each
    ``B_i``.
    """
    n = q.shape[0]
    V = np.zeros((n, 6))
    Ab = np.zeros((n, 6))
    J = np.zeros((n, 6, n))
    Rw = np.zeros((n, 3, 3))
    VT = np.zeros(6)
    AT = np.zeros(6)
    JT = np.zeros((n, 6))      # columns stored as rows
    col = np.zeros(6)
    RwT = np.eye(3)
    Rrel = np.empty((3, 3))
    for i in range(n):
        _joint_rotation(R0[i], axes[i], q[i], Rrel)
        k = 3 + axes[i]
        _to_child(Rrel, p0[i], VT, V[i])
        _to_child(Rrel, p0[i], AT, Ab[i])
        # velocity product: vin x (e_k qd)
        w = qd[i]
        v0, v1, v2, w0, w1, w2 = V[i, 0], V[i, 1], V[i, 2], V[i, 3], V[i, 4], V[i, 5]
        if axes[i] == 0:
            Ab[i, 1] += v2 * w
            Ab[i, 2] -= v1 * w
            Ab[i, 4] += w2 * w
            Ab[i, 5] -= w1 * w
        elif axes[i] == 1:
            Ab[i, 0] -= v2 * w
            Ab[i, 2] += v0 * w
            Ab[i, 3] -= w2 * w
            Ab[i, 5] += w0 * w
        else:
            Ab[i, 0] += v1 * w
            Ab[i, 1] -= v0 * w
            Ab[i, 3] += w1 * w
            Ab[i, 4] -= w0 * w
        V[i, k] += w
        for j in range(i):
            _to_child(Rrel, p0[i], JT[j], col)
            for a in range(6):
                J[i, a, j] = col[a]
        J[i, k, i] = 1.0
        _matmul3(RwT, Rrel, Rw[i])
        # move to T_i
        _to_child(Rl[i], pl[i], V[i], VT)
        _to_child(Rl[i], pl[i], Ab[i], AT)
        for j in range(i + 1):
            for a in range(6):
                col[a] = J[i, a, j]
            _to_child(Rl[i], pl[i], col, JT[j])
        _matmul3(Rw[i], Rl[i], RwT)
    return V, Ab, J, Rw


@njit(cache=True)
def _cholesky_solve(H, b):
    n = H.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = H[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return np.full(n, np.nan)
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


@njit(cache=True)
def forward_dynamics(axes, R0, p0, Rl, pl, phi, joint_inertia, q, qd, tau, fdist, tau_h, g_world):
    """Joint accelerations; NaN if the joint-space inertia is not positive definite."""
    n = q.shape[0]
    V, Ab, J, Rw = kinematics(axes, R0, p0, Rl, pl, q, qd)
    H = np.zeros((n, n))
    rhs = tau - tau_h
    F = np.empty(6)
    MJ = np.empty((n, 6))
    col = np.empty(6)
    for k in range(n):
        # fdist is the resisting disturbance the joints must supply
        _net_wrench(phi[k], Ab[k], V[k], Rw[k], g_world, fdist[k], F)
        for b in range(k + 1):
            for a in range(6):
                col[a] = J[k, a, b]
            _mass_mul(phi[k], col, MJ[b])
        for a in range(k + 1):
            s = 0.0
            for r in range(6):
                s += J[k, r, a] * F[r]
            rhs[a] -= s
            for b in range(a + 1):
                s = 0.0
                for r in range(6):
                    s += J[k, r, a] * MJ[b, r]
                H[a, b] += s
    for i in range(n):
        H[i, i] += joint_inertia[i]
        for j in range(i):
            H[j, i] = H[i, j]
    return _cholesky_solve(H, rhs)


@njit(cache=True)
def rk4_steps(axes, R0, p0, Rl, pl, phi, joint_inertia, q, qd, tau, fdist, tau_h,
              g_world, h, nsteps):
    """Integrate the plant over ``nsteps`` RK4 steps with inputs held constant."""
    for _ in range(nsteps):
        a1 = forward_dynamics(axes, R0, p0, Rl, pl, phi, joint_inertia, q, qd, tau, fdist, tau_h, g_world)
        q2 = q + 0.5 * h * qd
        v2 = qd + 0.5 * h * a1
        a2 = forward_dynamics(axes, R0, p0, Rl, pl, phi, joint_inertia, q2, v2, tau, fdist, tau_h, g_world)
        q3 = q + 0.5 * h * v2
        v3 = qd + 0.5 * h * a2
        a3 = forward_dynamics(axes, R0, p0, Rl, pl, phi, joint_inertia, q3, v3, tau, fdist, tau_h, g_world)
        q4 = q + h * v3
        v4 = qd + h * a3
        a4 = forward_dynamics(axes, R0, p0, Rl, pl, phi, joint_inertia, q4, v4, tau, fdist, tau_h, g_world)
        q = q + h / 6.0 * (qd + 2.0 * v2 + 2.0 * v3 + v4)
        qd = qd + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return q, qd


@njit(cache=True)
def required_sweep(axes, R0, p0, Rl, pl, q, qd, qd_r, qdd_r):
    """Forward sweep for the controller.

    Returns measured twists ``V``, required twists ``Vr`` and required
    accelerations ``Ar`` of every ``B_i`` plus world rotations ``Rw``.
    """
    n = q.shape[0]
    V = np.zeros((n, 6))
    Vr = np.zeros((n, 6))
    Ar = np.zeros((n, 6))
    Rw = np.zeros((n, 3, 3))
    VT = np.zeros(6)
    VrT = np.zeros(6)
    ArT = np.zeros(6)
    vin = np.zeros(6)
    RwT = np.eye(3)
    Rrel = np.empty((3, 3))
    for i in range(n):
        _joint_rotation(R0[i], axes[i], q[i], Rrel)
        k = 3 + axes[i]
        _to_child(Rrel, p0[i], VT, V[i])
        V[i, k] += qd[i]
        _to_child(Rrel, p0[i], VrT, vin)
        _to_child(Rrel, p0[i], ArT, Ar[i])
        # vin x (e_k qd): motion cross product with a unit angular axis
        e = np.zeros(6)
        e[k] = qd[i]
        w = vin[3:]
        v = vin[:3]
        Ar[i, 0] += w[1] * e[2] - w[2] * e[1] + v[1] * e[5] - v[2] * e[4]
        Ar[i, 1] += w[2] * e[0] - w[0] * e[2] + v[2] * e[3] - v[0] * e[5]
        Ar[i, 2] += w[0] * e[1] - w[1] * e[0] + v[0] * e[4] - v[1] * e[3]
        Ar[i, 3] += w[1] * e[5] - w[2] * e[4]
        Ar[i, 4] += w[2] * e[3] - w[0] * e[5]
        Ar[i, 5] += w[0] * e[4] - w[1] * e[3]
        Ar[i, k] += qdd_r[i]
        Vr[i] = vin
        Vr[i, k] += qd_r[i]
        _matmul3(RwT, Rrel, Rw[i])
        _to_child(Rl[i], pl[i], V[i], VT)
        _to_child(Rl[i], pl[i], Vr[i], VrT)
        _to_child(Rl[i], pl[i], Ar[i], ArT)
        _matmul3(Rw[i], Rl[i], RwT)
    return V, Vr, Ar, Rw


@njit(cache=True)
def force_sweep(axes, R0, p0, Rl, pl, q, net, f_tip):
    """Backward sweep: wrench at every ``B_j`` and the base reaction at ``T0``."""
    n = q.shape[0]
    FB = np.zeros((n, 6))
    FT = f_tip.copy()
    Rrel = np.empty((3, 3))
    for j in range(n - 1, -1, -1):
        _to_parent(Rl[j], pl[j], FT, FB[j])
        for a in range(6):
            FB[j, a] += net[j, a]
        _joint_rotation(R0[j], axes[j], q[j], Rrel)
        _to_parent(Rrel, p0[j], FB[j], FT)
    return FB, FT


@njit(cache=True)
def inverse_sweep(axes, R0, p0, Rl, pl, phi, q, qd, qdd, fdist, g_world):
    """Actual net wrench of every body and the wrench at each ``B_j`` for given ``qdd``."""
    n = q.shape[0]
    V, Ab, J, Rw = kinematics(axes, R0, p0, Rl, pl, q, qd)
    net = np.zeros((n, 6))
    A = np.empty(6)
    for k in range(n):
        for a in range(6):
            s = Ab[k, a]
            for b in range(k + 1):
                s += J[k, a, b] * qdd[b]
            A[a] = s
        _net_wrench(phi[k], A, V[k], Rw[k], g_world, fdist[k], net[k])
    FB, _ = force_sweep(axes, R0, p0, Rl, pl, q, net, np.zeros(6))
    return net, FB


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _skew(r):
    S = np.zeros((3, 3))
    S[0, 1] = -r[2]
    S[0, 2] = r[1]
    S[1, 0] = r[2]
    S[1, 2] = -r[0]
    S[2, 0] = -r[1]
    S[2, 1] = r[0]
    return S


@njit(cache=True)
def _inertia_map(x):
    L = np.zeros((3, 6))
    L[0, 0] = x[0]
    L[0, 3] = x[1]
    L[0, 5] = x[2]
    L[1, 1] = x[1]
    L[1, 3] = x[0]
    L[1, 4] = x[2]
    L[2, 2] = x[2]
    L[2, 4] = x[1]
    L[2, 5] = x[0]
    return L


@njit(cache=True)
def regressor_batch(V, Vr, Ar, g):
    """Fast path for :func:`vdcexo.body.regressor` over ``(n, 6)`` inputs."""
    n = V.shape[0]
    Y = np.zeros((n, 6, 10))
    for k in range(n):
        v = V[k, :3]
        w = V[k, 3:]
        vr = Vr[k, :3]
        wr = Vr[k, 3:]
        bl = Ar[k, :3] + _cross(w, vr) + _cross(v, wr)
        ba = Ar[k, 3:] + _cross(w, wr)
        gk = g[k]
        col = bl + _cross(w, vr) - gk
        ang = _cross(v, vr)
        for a in range(3):
            Y[k, a, 0] = col[a]
            Y[k, 3 + a, 0] = ang[a]
        sw = _skew(w)
        top = _skew(ba) + sw @ _skew(wr)
        bot = -_skew(bl) + _skew(gk) - sw @ _skew(vr) + _skew(v) @ _skew(wr)
        for a in range(3):
            for b in range(3):
                Y[k, a, 1 + b] = top[a, b]
                Y[k, 3 + a, 1 + b] = bot[a, b]
        # inertia columns: L(ba) + skew(w) L(wr)
        Lb = _inertia_map(ba)
        Lw = sw @ _inertia_map(wr)
        for a in range(3):
            for b in range(6):
                Y[k, 3 + a, 4 + b] = Lb[a, b] + Lw[a, b]
    return Y


# --- estimator kernels (flattened batch, see vdcexo.estimator) ---

@njit(cache=True)
def pseudo_to_phi_batch(L, sym_tol):
    """Parameter vectors of ``(n, 4, 4)`` pseudo-inertias; raises if any is not symmetric."""
    n = L.shape[0]
    phi = np.empty((n, 10))
    for k in range(n):
        big = 1.0
        asym = 0.0
        for a in range(4):
            for b in range(4):
                big = max(big, abs(L[k, a, b]))
                asym = max(asym, abs(L[k, a, b] - L[k, b, a]))
        if asym > sym_tol * big:
            raise ValueError("pseudo-inertia is not symmetric")
        phi[k, 0] = L[k, 3, 3]
        phi[k, 1] = L[k, 0, 3]
        phi[k, 2] = L[k, 1, 3]
        phi[k, 3] = L[k, 2, 3]
        phi[k, 4] = L[k, 1, 1] + L[k, 2, 2]
        phi[k, 5] = L[k, 0, 0] + L[k, 2, 2]
        phi[k, 6] = L[k, 0, 0] + L[k, 1, 1]
        phi[k, 7] = -L[k, 0, 1]
        phi[k, 8] = -L[k, 1, 2]
        phi[k, 9] = -L[k, 0, 2]
    return phi


@njit(cache=True)
def coeff_to_symmetric_batch(s):
    n = s.shape[0]
    S = np.empty((n, 4, 4))
    for k in range(n):
        S[k, 0, 0] = s[k, 5] + s[k, 6]
        S[k, 1, 1] = s[k, 4] + s[k, 6]
        S[k, 2, 2] = s[k, 4] + s[k, 5]
        S[k, 3, 3] = s[k, 0]
        S[k, 0, 1] = S[k, 1, 0] = -0.5 * s[k, 7]
        S[k, 0, 2] = S[k, 2, 0] = -0.5 * s[k, 9]
        S[k, 1, 2] = S[k, 2, 1] = -0.5 * s[k, 8]
        S[k, 0, 3] = S[k, 3, 0] = 0.5 * s[k, 1]
        S[k, 1, 3] = S[k, 3, 1] = 0.5 * s[k, 2]
        S[k, 2, 3] = S[k, 3, 2] = 0.5 * s[k, 3]
    return S


@njit(cache=True)
def rbf_basis_batch(chi, centers, widths):
    n, j, d = centers.shape
    psi = np.empty((n, j))
    for k in range(n):
        for u in range(j):
            s = 0.0
            for a in range(d):
                diff = chi[k, a] - centers[k, u, a]
                s += diff * diff
            psi[k, u] = np.exp(-s / (widths[k, u] * widths[k, u]))
    return psi


@njit(cache=True)
def nal_batch(L, S, gain, dt, max_halvings):
    """Returns ``(L_new, halvings, min_eigs, failed_index)``; ``failed_index`` is -1 on success."""
    n = L.shape[0]
    out = np.empty_like(L)
    halvings = np.zeros(n, dtype=np.int64)
    eigs = np.empty(n)
    trial = np.empty((4, 4))
    for k in range(n):
        delta = L[k] @ S[k] @ L[k] / gain
        delta = 0.5 * (delta + delta.T)
        step = dt
        while True:
            for a in range(4):
                for b in range(4):
                    trial[a, b] = L[k, a, b] + step * delta[a, b]
            e = np.linalg.eigvalsh(trial)[0]
            if e > 0:
                break
            if halvings[k] >= max_halvings:
                return out, halvings, eigs, k
            step *= 0.5
            halvings[k] += 1
        for a in range(4):
            for b in range(4):
                out[k, a, b] = 0.5 * (trial[a, b] + trial[b, a])
        eigs[k] = e
    return out, halvings, eigs, -1
