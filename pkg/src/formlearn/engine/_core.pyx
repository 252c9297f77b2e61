# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation backend.

Same state layout and step semantics as the NumPy fallback (pyref); the
hot loops (localized regressor lookup, weight diffusion, RK4 vector ops)
are flat C loops.  Rotation is identity for all packed plant kinds.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, cos, exp, floor, fmax, isfinite, sqrt

cnp.import_array()

STATUS_OK = 0
STATUS_NONFINITE = 1

BACKEND_NAME = "compiled"

DEF MAX_DIM = 16  # axes of the lattice (2n)


cdef struct Sim:
    # dimensions
    int n, N, n_r, n_units, dim_q, per_dim, mode
    int two_n, state_len, off_plant, off_obs, off_w, wstride
    # leader
    double *A0      # n x 2n
    double *B0      # n x n_r
    int sig_kind
    double *sig_a
    double *sig_w
    double *sig_ph
    # topology
    double *adj     # N x N
    double *links   # N
    double *degree  # N
    # observer
    double *K1      # 2n x 2n
    double *K2      # n_r x 2n
    double alpha1, alpha2, eps
    # controller
    double *H1      # N x n x n
    double *H2      # N x n x n
    double gamma1, gamma2, sigma
    double *offsets # N x n
    double *QW      # N x N
    int *qw_cnt     # per-row nonzero counts of QW
    int *qw_col     # N x N column indices
    double *qw_val  # N x N values
    # plant
    int plant_kind
    double *M       # n x n
    double *Mchol   # n x n lower factor
    double ca, cb, cc
    double *D0      # n x n
    double *dabs    # n
    double *g0      # n
    double syn_omega
    int n_sup
    double *syn_w        # n x n_sup
    double *syn_centers  # n_sup x dim_q
    # grid
    double *grid_lo # dim_q
    double *grid_h  # dim_q
    double grid_width, d_loc
    # scratch (allocated once per run)
    double *x0_dot      # 2n
    double *obs_dot     # N x 2n
    double *phi         # N x 2n
    double *phi_dot     # N x 2n
    double *z1          # N x n
    double *z2          # N x n
    double *beta        # N x n
    double *tau         # N x n
    double *beta_dot    # N x n
    double *rvec        # n_r
    double *force       # n
    double *wbuf        # N
    int *act_idx        # per-agent active units (cap n_units)
    double *act_val
    double *vtmp        # 2n temp


cdef inline void _solve_chol(Sim *s, double *b, double *out) noexcept nogil:
    """out = M^{-1} b via the cached lower Cholesky factor."""
    cdef int i, j, n = s.n
    cdef double acc
    for i in range(n):
        acc = b[i]
        for j in range(i):
            acc -= s.Mchol[i * n + j] * out[j]
        out[i] = acc / s.Mchol[i * n + i]
    for i in range(n - 1, -1, -1):
        acc = out[i]
        for j in range(i + 1, n):
            acc -= s.Mchol[j * n + i] * out[j]
        out[i] = acc / s.Mchol[i * n + i]


cdef inline void _input_signal(Sim *s, double t, double *out) noexcept nogil:
    cdef int m
    if s.sig_kind == 0:
        for m in range(s.n_r):
            out[m] = 0.0
    elif s.sig_kind == 1:
        for m in range(s.n_r):
            out[m] = s.sig_a[m]
    else:
        for m in range(s.n_r):
            out[m] = s.sig_a[m] * cos(s.sig_w[m] * t + s.sig_ph[m])


cdef int _active_units(Sim *s, double *x, int *idx_out, double *val_out) noexcept nogil:
    """Units with center within d_loc of x; returns the count."""
    cdef int q, k, cnt = 0, dq = s.dim_q, per = s.per_dim
    cdef int lo[MAX_DIM]
    cdef int hi[MAX_DIM]
    cdef int cur[MAX_DIM]
    cdef double r = s.d_loc, h, base, d2, diff
    cdef double r2 = r * r
    cdef long flat
    for q in range(dq):
        h = s.grid_h[q]
        base = s.grid_lo[q]
        lo[q] = <int>ceil((x[q] - r - base) / h)
        hi[q] = <int>floor((x[q] + r - base) / h)
        if lo[q] < 0:
            lo[q] = 0
        if hi[q] > per - 1:
            hi[q] = per - 1
        if hi[q] < lo[q]:
            return 0
        cur[q] = lo[q]
    while True:
        d2 = 0.0
        flat = 0
        for q in range(dq):
            diff = x[q] - (s.grid_lo[q] + s.grid_h[q] * cur[q])
            d2 += diff * diff
            flat = flat * per + cur[q]
        if d2 <= r2:
            idx_out[cnt] = <int>flat
            val_out[cnt] = exp(-d2 / s.grid_width)
            cnt += 1
        q = dq - 1
        while q >= 0:
            cur[q] += 1
            if cur[q] <= hi[q]:
                break
            cur[q] = lo[q]
            q -= 1
        if q < 0:
            break
    return cnt


cdef void _plant_force(Sim *s, double *p, double *nu, double *out) noexcept nogil:
    cdef int i, j, k
    cdef double a, b, d2, diff, sv
    cdef double x[MAX_DIM]
    for i in range(s.n):
        out[i] = 0.0
    if s.plant_kind == 0:
        # gyroscopic coupling + drag, three-axis form
        a = -s.ca * nu[1] - s.cb * nu[2]
        b = s.cc * nu[0]
        out[0] = a * nu[2]
        out[1] = b * nu[2]
        out[2] = -a * nu[0] - b * nu[1]
        for i in range(s.n):
            for j in range(s.n):
                out[i] += s.D0[i * s.n + j] * nu[j]
            out[i] += s.dabs[i] * (nu[i] if nu[i] >= 0 else -nu[i]) * nu[i]
    elif s.plant_kind == 1:
        for i in range(s.n):
            for j in range(s.n):
                out[i] += s.D0[i * s.n + j] * nu[j]
            out[i] += s.dabs[i] * (nu[i] if nu[i] >= 0 else -nu[i]) * nu[i] + s.g0[i]
    else:
        # spring + exact network force
        for i in range(s.n):
            x[i] = p[i]
            x[s.n + i] = nu[i]
        for k in range(s.n_sup):
            d2 = 0.0
            for j in range(s.dim_q):
                diff = x[j] - s.syn_centers[k * s.dim_q + j]
                d2 += diff * diff
            sv = exp(-d2 / s.grid_width)
            for i in range(s.n):
                out[i] += s.syn_w[i * s.n_sup + k] * sv
        for i in range(s.n):
            a = 0.0
            for j in range(s.n):
                a += s.M[i * s.n + j] * p[j]
            out[i] += s.syn_omega * s.syn_omega * a


cdef void _observer_blocks(Sim *s, double t, double *x0, double *obs) noexcept nogil:
    """Fill s.x0_dot, s.phi, s.obs_dot."""
    cdef int i, j, k, m, n = s.n, two_n = s.two_n
    cdef double acc, nrm, scale
    # leader derivative
    _input_signal(s, t, s.rvec)
    for k in range(n):
        s.x0_dot[k] = x0[n + k]
    for k in range(n):
        acc = 0.0
        for m in range(two_n):
            acc += s.A0[k * two_n + m] * x0[m]
        for m in range(s.n_r):
            acc += s.B0[k * s.n_r + m] * s.rvec[m]
        s.x0_dot[n + k] = acc
    # disagreement
    for i in range(s.N):
        for m in range(two_n):
            acc = s.degree[i] * obs[i * two_n + m] - s.links[i] * x0[m]
            for j in range(s.N):
                acc -= s.adj[i * s.N + j] * obs[j * two_n + m]
            s.phi[i * two_n + m] = acc
    # observer derivative
    for i in range(s.N):
        for k in range(n):
            s.obs_dot[i * two_n + k] = obs[i * two_n + n + k]
        for k in range(n):
            acc = 0.0
            for m in range(two_n):
                acc += s.A0[k * two_n + m] * obs[i * two_n + m]
            s.obs_dot[i * two_n + n + k] = acc
        for k in range(two_n):
            acc = 0.0
            for m in range(two_n):
                acc += s.K1[k * two_n + m] * s.phi[i * two_n + m]
            s.obs_dot[i * two_n + k] += s.alpha1 * acc
        # switching term
        nrm = 0.0
        for k in range(s.n_r):
            acc = 0.0
            for m in range(two_n):
                acc += s.K2[k * two_n + m] * s.phi[i * two_n + m]
            s.rvec[k] = acc
            nrm += acc * acc
        nrm = sqrt(nrm)
        if s.eps > 0.0:
            scale = 1.0 / fmax(nrm, s.eps)
        elif nrm > 0.0:
            scale = 1.0 / nrm
        else:
            scale = 0.0
        for k in range(n):
            acc = 0.0
            for m in range(s.n_r):
                acc += s.B0[k * s.n_r + m] * s.rvec[m]
            s.obs_dot[i * two_n + n + k] += s.alpha2 * scale * acc


cdef int _derivative(Sim *s, double t, double *y, double *dy) noexcept nogil:
    """dy = f(t, y).  Also leaves tau/z1/z2/beta in scratch."""
    cdef int i, j, k, m, cnt
    cdef int n = s.n, N = s.N, two_n = s.two_n, ws = s.wstride
    cdef double acc
    cdef double *x0 = y
    cdef double *obs = y + s.off_obs
    cdef double *plant
    cdef double *W
    cdef double *dW

    _observer_blocks(s, t, x0, obs)
    for m in range(two_n):
        dy[m] = s.x0_dot[m]
    for i in range(N):
        for m in range(two_n):
            dy[s.off_obs + i * two_n + m] = s.obs_dot[i * two_n + m]
    if s.mode == 1:
        return 0

    plant = y + s.off_plant
    W = y + s.off_w
    dW = dy + s.off_w

    # weight linear part: fused single pass per agent over the nonzero
    # mixing entries (diffusion rows are sparse for sparse graphs)
    cdef int cnt_q
    cdef double q0, q1, q2, q3
    cdef double *w0
    cdef double *w1
    cdef double *w2
    cdef double *w3
    cdef double *dWi
    for i in range(N):
        cnt_q = s.qw_cnt[i]
        dWi = dW + i * ws
        q0 = q1 = q2 = q3 = 0.0
        w0 = w1 = w2 = w3 = W
        if cnt_q > 0:
            q0 = s.qw_val[i * N]; w0 = W + s.qw_col[i * N] * ws
        if cnt_q > 1:
            q1 = s.qw_val[i * N + 1]; w1 = W + s.qw_col[i * N + 1] * ws
        if cnt_q > 2:
            q2 = s.qw_val[i * N + 2]; w2 = W + s.qw_col[i * N + 2] * ws
        if cnt_q > 3:
            q3 = s.qw_val[i * N + 3]; w3 = W + s.qw_col[i * N + 3] * ws
        if cnt_q == 0:
            for m in range(ws):
                dWi[m] = 0.0
        elif cnt_q == 1:
            for m in range(ws):
                dWi[m] = -q0 * w0[m]
        elif cnt_q == 2:
            for m in range(ws):
                dWi[m] = -(q0 * w0[m] + q1 * w1[m])
        elif cnt_q == 3:
            for m in range(ws):
                dWi[m] = -(q0 * w0[m] + q1 * w1[m] + q2 * w2[m])
        elif cnt_q == 4:
            for m in range(ws):
                dWi[m] = -(q0 * w0[m] + q1 * w1[m] + q2 * w2[m] + q3 * w3[m])
        else:
            for m in range(ws):
                acc = 0.0
                for j in range(cnt_q):
                    acc += s.qw_val[i * N + j] * W[s.qw_col[i * N + j] * ws + m]
                dWi[m] = -acc

    for i in range(N):
        # z1, beta, z2
        for k in range(n):
            s.z1[i * n + k] = plant[i * two_n + k] - obs[i * two_n + k] - s.offsets[i * n + k]
        for k in range(n):
            acc = s.obs_dot[i * two_n + k]
            for m in range(n):
                acc -= s.H1[(i * n + k) * n + m] * s.z1[i * n + m]
            s.beta[i * n + k] = acc
            s.z2[i * n + k] = plant[i * two_n + n + k] - acc
        # network output and weight drive
        cnt = _active_units(s, plant + i * two_n, s.act_idx, s.act_val)
        for k in range(n):
            acc = 0.0
            for m in range(cnt):
                acc += W[i * ws + k * s.n_units + s.act_idx[m]] * s.act_val[m]
            s.tau[i * n + k] = acc
        for k in range(n):
            acc = s.tau[i * n + k] - s.z1[i * n + k]
            for m in range(n):
                acc -= s.H2[(i * n + k) * n + m] * s.z2[i * n + m]
            s.tau[i * n + k] = acc
        for k in range(n):
            for m in range(cnt):
                dW[i * ws + k * s.n_units + s.act_idx[m]] -= (
                    s.gamma1 * s.z2[i * n + k] * s.act_val[m]
                )
        # plant dynamics
        _plant_force(s, plant + i * two_n, plant + i * two_n + n, s.force)
        for k in range(n):
            s.force[k] = s.tau[i * n + k] - s.force[k]
            dy[s.off_plant + i * two_n + k] = plant[i * two_n + n + k]
        _solve_chol(s, s.force, s.vtmp)
        for k in range(n):
            dy[s.off_plant + i * two_n + n + k] = s.vtmp[k]
    return 0


cdef void _beta_dot(Sim *s, double *y) noexcept nogil:
    """Fill s.beta_dot from the scratch left by _derivative (call after)."""
    cdef int i, k, m, j, n = s.n, two_n = s.two_n
    cdef double acc
    cdef double *plant = y + s.off_plant
    # phi_dot = deg*obs_dot - adj@obs_dot - links*x0_dot
    for i in range(s.N):
        for m in range(two_n):
            acc = s.degree[i] * s.obs_dot[i * two_n + m] - s.links[i] * s.x0_dot[m]
            for j in range(s.N):
                acc -= s.adj[i * s.N + j] * s.obs_dot[j * two_n + m]
            s.phi_dot[i * two_n + m] = acc
    for i in range(s.N):
        # phat_ddot = vhat_dot + alpha1*(K1 phi_dot)[:n]
        for k in range(n):
            acc = s.obs_dot[i * two_n + n + k]
            for m in range(two_n):
                acc += s.alpha1 * s.K1[k * two_n + m] * s.phi_dot[i * two_n + m]
            s.vtmp[k] = acc
        for k in range(n):
            acc = s.vtmp[k]
            for m in range(n):
                acc -= s.H1[(i * n + k) * n + m] * (
                    plant[i * two_n + n + m] - s.obs_dot[i * two_n + m]
                )
            s.beta_dot[i * n + k] = acc


cdef void _log_row(Sim *s, double t, double *y, double *row) noexcept nogil:
    cdef int i, j, k, m, c = 0
    cdef int n = s.n, N = s.N, two_n = s.two_n, ws = s.wstride, nu_ = s.n_units
    cdef double acc, diff, worst
    cdef double *plant = y + s.off_plant
    cdef double *obs = y + s.off_obs
    cdef double *W = y + s.off_w

    row[c] = t
    c += 1
    for m in range(two_n):
        row[c] = y[m]
        c += 1
    if s.mode == 1:
        for i in range(N):
            for m in range(two_n):
                row[c] = obs[i * two_n + m]
                c += 1
            acc = 0.0
            for m in range(two_n):
                diff = obs[i * two_n + m] - y[m]
                acc += diff * diff
            row[c] = sqrt(acc)
            c += 1
        return
    _beta_dot(s, y)
    for i in range(N):
        for m in range(two_n):
            row[c] = plant[i * two_n + m]
            c += 1
        for m in range(two_n):
            row[c] = obs[i * two_n + m]
            c += 1
        for m in range(n):
            row[c] = s.tau[i * n + m]
            c += 1
        for m in range(n):
            row[c] = s.beta_dot[i * n + m]
            c += 1
        acc = 0.0
        for m in range(n):
            acc += s.z1[i * n + m] * s.z1[i * n + m]
        row[c] = sqrt(acc)
        c += 1
        acc = 0.0
        for m in range(n):
            acc += s.z2[i * n + m] * s.z2[i * n + m]
        row[c] = sqrt(acc)
        c += 1
        acc = 0.0
        for m in range(two_n):
            diff = obs[i * two_n + m] - y[m]
            acc += diff * diff
        row[c] = sqrt(acc)
        c += 1
    for i in range(N):
        for k in range(n):
            acc = 0.0
            for m in range(nu_):
                acc += W[i * ws + k * nu_ + m] * W[i * ws + k * nu_ + m]
            row[c] = sqrt(acc)
            c += 1
    for k in range(n):
        worst = 0.0
        for i in range(N):
            for j in range(i + 1, N):
                acc = 0.0
                for m in range(nu_):
                    diff = W[i * ws + k * nu_ + m] - W[j * ws + k * nu_ + m]
                    acc += diff * diff
                acc = sqrt(acc)
                if acc > worst:
                    worst = acc
        row[c] = worst
        c += 1


cdef int _check_small(Sim *s, double *y) noexcept nogil:
    """Return -1 if finite, else index class: 0 leader, 1+i plant, 1+N+i obs."""
    cdef int i, m
    for m in range(s.two_n):
        if not isfinite(y[m]):
            return 0
    if s.mode == 0:
        for i in range(s.N):
            for m in range(s.two_n):
                if not isfinite(y[s.off_plant + i * s.two_n + m]):
                    return 1 + i
    for i in range(s.N):
        for m in range(s.two_n):
            if not isfinite(y[s.off_obs + i * s.two_n + m]):
                return 1 + s.N + i
    return -1


cdef class _Workspace:
    """Owns scratch memory and the borrowed references for one run."""
    cdef Sim s
    cdef list _keep  # keep ndarray refs alive

    def __cinit__(self):
        self._keep = []

    def setup(self, spec, int mode):
        cdef Sim *s = &self.s

        def hold(arr, dtype=np.float64):
            A = np.ascontiguousarray(arr, dtype=dtype)
            self._keep.append(A)
            return A

        s.n = spec.n
        s.N = spec.N
        s.n_r = spec.n_r
        s.n_units = spec.n_units
        s.dim_q = spec.dim_q
        s.per_dim = spec.per_dim
        s.mode = mode
        s.two_n = 2 * s.n
        s.off_plant = s.two_n
        if mode == 1:
            s.off_obs = s.two_n
            s.off_w = s.two_n + s.N * s.two_n
            s.state_len = s.off_w
        else:
            s.off_obs = s.two_n + s.N * s.two_n
            s.off_w = s.off_obs + s.N * s.two_n
            s.state_len = s.off_w + s.N * s.n * s.n_units
        s.wstride = s.n * s.n_units

        cdef double[::1] v

        v = hold(spec.A0).ravel(); s.A0 = &v[0]
        v = hold(spec.B0).ravel(); s.B0 = &v[0]
        s.sig_kind = spec.sig_kind
        v = hold(spec.sig_a).ravel(); s.sig_a = &v[0]
        v = hold(spec.sig_w).ravel(); s.sig_w = &v[0]
        v = hold(spec.sig_ph).ravel(); s.sig_ph = &v[0]
        v = hold(spec.adj).ravel(); s.adj = &v[0]
        v = hold(spec.links).ravel(); s.links = &v[0]
        v = hold(spec.degree).ravel(); s.degree = &v[0]
        v = hold(spec.K1).ravel(); s.K1 = &v[0]
        v = hold(spec.K2).ravel(); s.K2 = &v[0]
        s.alpha1 = spec.alpha1
        s.alpha2 = spec.alpha2
        s.eps = spec.eps
        v = hold(spec.H1).ravel(); s.H1 = &v[0]
        v = hold(spec.H2).ravel(); s.H2 = &v[0]
        s.gamma1 = spec.gamma1
        s.gamma2 = spec.gamma2
        s.sigma = spec.sigma
        v = hold(spec.offsets).ravel(); s.offsets = &v[0]
        v = hold(spec.QW).ravel(); s.QW = &v[0]
        # sparsity of the weight mixing matrix
        QW = np.asarray(spec.QW)
        N_ = QW.shape[0]
        qcnt = np.zeros(N_, dtype=np.int32)
        qcol = np.zeros((N_, N_), dtype=np.int32)
        qval = np.zeros((N_, N_))
        for i_ in range(N_):
            nz = np.flatnonzero(QW[i_])
            qcnt[i_] = len(nz)
            qcol[i_, : len(nz)] = nz
            qval[i_, : len(nz)] = QW[i_, nz]
        cdef int[::1] qc = hold(qcnt, np.int32)
        s.qw_cnt = &qc[0]
        cdef int[::1] qcl = hold(qcol, np.int32).ravel()
        s.qw_col = &qcl[0]
        v = hold(qval).ravel(); s.qw_val = &v[0]
        s.plant_kind = spec.plant_kind
        v = hold(spec.M).ravel(); s.M = &v[0]
        v = hold(spec.M_chol).ravel(); s.Mchol = &v[0]
        s.ca, s.cb, s.cc = spec.vessel_c
        v = hold(spec.D0).ravel(); s.D0 = &v[0]
        v = hold(spec.d_abs).ravel(); s.dabs = &v[0]
        v = hold(spec.g0).ravel(); s.g0 = &v[0]
        s.syn_omega = spec.syn_omega
        s.n_sup = spec.syn_support.shape[0]
        v = hold(spec.syn_w).ravel(); s.syn_w = &v[0]
        v = hold(spec.syn_centers).ravel(); s.syn_centers = &v[0]
        v = hold(spec.grid_lo).ravel(); s.grid_lo = &v[0]
        v = hold(spec.grid_h).ravel(); s.grid_h = &v[0]
        s.grid_width = spec.grid_width
        s.d_loc = spec.d_loc

        if s.dim_q > MAX_DIM:
            raise ValueError("grid dimension exceeds kernel limit")

        cdef int two_n = s.two_n, N = s.N, n = s.n
        scr = hold(np.zeros(
            two_n + 4 * N * two_n + 5 * N * n + s.n_r + n + N + two_n + s.n_units
        ))
        cdef double[::1] sv = scr
        cdef double *ptr = &sv[0]
        s.x0_dot = ptr; ptr += two_n
        s.obs_dot = ptr; ptr += N * two_n
        s.phi = ptr; ptr += N * two_n
        s.phi_dot = ptr; ptr += N * two_n
        s.z1 = ptr; ptr += N * n
        s.z2 = ptr; ptr += N * n
        s.beta = ptr; ptr += N * n
        s.tau = ptr; ptr += N * n
        s.beta_dot = ptr; ptr += N * n
        s.rvec = ptr; ptr += s.n_r
        s.force = ptr; ptr += n
        s.wbuf = ptr; ptr += N
        s.vtmp = ptr; ptr += two_n
        s.act_val = ptr; ptr += s.n_units
        idx = hold(np.zeros(s.n_units, dtype=np.int32), np.int32)
        cdef int[::1] iv = idx
        s.act_idx = &iv[0]
        return 0


def derivative(spec, double t, cnp.ndarray[double, ndim=1] y, extras=None):
    """Single derivative evaluation (test/verification hook)."""
    cdef _Workspace ws = _Workspace()
    ws.setup(spec, spec.mode)
    cdef double[::1] yv = np.ascontiguousarray(y)
    dy = np.zeros_like(y)
    cdef double[::1] dv = dy
    _derivative(&ws.s, t, &yv[0], &dv[0])
    cdef int n = spec.n, N = spec.N, i, k
    if extras is not None and spec.mode == 0:
        _beta_dot(&ws.s, &yv[0])
        tau = np.zeros((N, n)); z1 = np.zeros((N, n))
        z2 = np.zeros((N, n)); bd = np.zeros((N, n))
        for i in range(N):
            for k in range(n):
                tau[i, k] = ws.s.tau[i * n + k]
                z1[i, k] = ws.s.z1[i * n + k]
                z2[i, k] = ws.s.z2[i * n + k]
                bd[i, k] = ws.s.beta_dot[i * n + k]
        extras.update(tau=tau, z1=z1, z2=z2, beta_dot=bd)
    return dy


def run(
    spec,
    cnp.ndarray[double, ndim=1] y0,
    double dt,
    long n_steps,
    long log_stride,
    cnp.ndarray[double, ndim=2] log_out,
    cnp.ndarray[long, ndim=1] ckpt_steps,
    ckpt_out,
    wbar_rows,
    wbar_out,
):
    """Fixed-step RK4 loop; mirrors pyref.run exactly."""
    cdef _Workspace ws = _Workspace()
    ws.setup(spec, spec.mode)
    cdef Sim *s = &ws.s

    y_arr = np.ascontiguousarray(y0, dtype=np.float64).copy()
    cdef double[::1] y = y_arr
    cdef long L = y_arr.shape[0]
    k1_arr = np.zeros(L); k2_arr = np.zeros(L)
    k3_arr = np.zeros(L); k4_arr = np.zeros(L); yt_arr = np.zeros(L)
    cdef double[::1] k1 = k1_arr, k2 = k2_arr, k3 = k3_arr, k4 = k4_arr, yt = yt_arr
    cdef double[:, ::1] logv = log_out
    cdef long[::1] cks = ckpt_steps

    cdef double[:, :, :, ::1] ckv = None
    cdef double[:, :, ::1] wbv = None
    cdef bint have_ck = ckpt_out is not None
    cdef bint have_wb = wbar_out is not None
    if have_ck:
        ckv = ckpt_out
    if have_wb:
        wbv = wbar_out

    cdef long wb_lo = wbar_rows[0], wb_hi = wbar_rows[1]
    cdef long rows_written = 0, wbar_count = 0, ckpt_i = 0
    cdef long step = 0, m, i, k
    cdef int status = 0, badc = -1
    cdef long bad_step = -1
    cdef double t
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    cdef double *Wp

    # initial checkpoints / row
    if have_ck:
        while ckpt_i < cks.shape[0] and cks[ckpt_i] == 0:
            Wp = &y[0] + s.off_w
            for i in range(s.N):
                for k in range(s.n):
                    for m in range(s.n_units):
                        ckv[ckpt_i, i, k, m] = Wp[i * s.wstride + k * s.n_units + m]
            ckpt_i += 1
    _derivative(s, 0.0, &y[0], &k1[0])  # warm scratch for the first log row
    _log_row(s, 0.0, &y[0], &logv[rows_written, 0])
    if have_wb and wb_lo <= rows_written < wb_hi:
        Wp = &y[0] + s.off_w
        for i in range(s.N):
            for k in range(s.n):
                for m in range(s.n_units):
                    wbv[i, k, m] += Wp[i * s.wstride + k * s.n_units + m]
        wbar_count += 1
    rows_written += 1

    with nogil:
        for step in range(1, n_steps + 1):
            t = (step - 1) * dt
            _derivative(s, t, &y[0], &k1[0])
            for m in range(L):
                yt[m] = y[m] + h2 * k1[m]
            _derivative(s, t + h2, &yt[0], &k2[0])
            for m in range(L):
                yt[m] = y[m] + h2 * k2[m]
            _derivative(s, t + h2, &yt[0], &k3[0])
            for m in range(L):
                yt[m] = y[m] + dt * k3[m]
            _derivative(s, t + dt, &yt[0], &k4[0])
            for m in range(L):
                y[m] += h6 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m])

            badc = _check_small(s, &y[0])
            if badc >= 0:
                status = 1
                bad_step = step
                break

            if have_ck:
                while ckpt_i < cks.shape[0] and cks[ckpt_i] == step:
                    Wp = &y[0] + s.off_w
                    for i in range(s.N):
                        for k in range(s.n):
                            for m in range(s.n_units):
                                ckv[ckpt_i, i, k, m] = Wp[i * s.wstride + k * s.n_units + m]
                    ckpt_i += 1

            if step % log_stride == 0 or step == n_steps:
                if s.mode == 0:
                    for m in range(s.off_w, s.state_len):
                        if not isfinite(y[m]):
                            status = 1
                            badc = 1 + 2 * s.N  # weights
                            bad_step = step
                            break
                    if status != 0:
                        break
                _derivative(s, step * dt, &y[0], &k1[0])  # refresh scratch
                _log_row(s, step * dt, &y[0], &logv[rows_written, 0])
                if have_wb and wb_lo <= rows_written < wb_hi:
                    Wp = &y[0] + s.off_w
                    for i in range(s.N):
                        for k in range(s.n):
                            for m in range(s.n_units):
                                wbv[i, k, m] += Wp[i * s.wstride + k * s.n_units + m]
                    wbar_count += 1
                rows_written += 1

    bad_name = None
    if status != 0:
        if badc == 0:
            bad_name = "leader"
        elif 1 <= badc <= s.N:
            bad_name = f"plant[{badc - 1}]"
        elif s.N < badc <= 2 * s.N:
            bad_name = f"observer[{badc - 1 - s.N}]"
        else:
            bad_name = "weights"
    return {
        "status": status,
        "bad_component": bad_name,
        "bad_step": bad_step,
        "rows": rows_written,
        "wbar_count": wbar_count,
        "y_final": y_arr,
        "backend": BACKEND_NAME,
    }
