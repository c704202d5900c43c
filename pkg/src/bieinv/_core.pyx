# cython: language_level=3
"""Compiled numeric core.

Entry points, parameter layout and cache layout mirror `_core_py` exactly;
see that module for documentation. Matrices here are small (width ~10-128),
so plain C loops beat BLAS dispatch and NumPy per-op overhead.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef struct Offs:
    Py_ssize_t w_in, b_in, A1, a1, B1, c1, A2, a2, B2, c2, w_out, b_out, total


cdef Offs get_offs(Py_ssize_t m, Py_ssize_t d) noexcept nogil:
    cdef Offs o
    o.w_in = 0
    o.b_in = m * d
    o.A1 = o.b_in + m
    o.a1 = o.A1 + m * m
    o.B1 = o.a1 + m
    o.c1 = o.B1 + m * m
    o.A2 = o.c1 + m
    o.a2 = o.A2 + m * m
    o.B2 = o.a2 + m
    o.c2 = o.B2 + m * m
    o.w_out = o.c2 + m
    o.b_out = o.w_out + m
    o.total = o.b_out + 1
    return o


cdef inline double c_act(double x) noexcept nogil:
    return x * x * x if x > 0.0 else 0.0


cdef inline double c_dact(double x) noexcept nogil:
    return 3.0 * x * x if x > 0.0 else 0.0


cdef inline double c_ddact(double x) noexcept nogil:
    return 6.0 * x if x > 0.0 else 0.0


cdef void lin_t(double[:, ::1] A, double[::1] th, Py_ssize_t oW, Py_ssize_t ob,
                Py_ssize_t mo, Py_ssize_t mi, double[:, ::1] out) noexcept nogil:
    # out = A @ W.T + b, W row-major [mo, mi] at offset oW, b [mo] at ob
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(A.shape[0]):
        for j in range(mo):
            s = th[ob + j]
            for k in range(mi):
                s += A[i, k] * th[oW + j * mi + k]
            out[i, j] = s


cdef void mat_t(double[:, ::1] A, double[::1] th, Py_ssize_t oW,
                Py_ssize_t mo, Py_ssize_t mi, double[:, ::1] out) noexcept nogil:
    # out = A @ W.T
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(A.shape[0]):
        for j in range(mo):
            s = 0.0
            for k in range(mi):
                s += A[i, k] * th[oW + j * mi + k]
            out[i, j] = s


cdef void mat_n(double[:, ::1] A, double[::1] th, Py_ssize_t oW,
                Py_ssize_t mo, Py_ssize_t mi, double[:, ::1] out) noexcept nogil:
    # out = A @ W, A [n, mo], W row-major [mo, mi] at oW
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(A.shape[0]):
        for k in range(mi):
            s = 0.0
            for j in range(mo):
                s += A[i, j] * th[oW + j * mi + k]
            out[i, k] = s


cdef void atb_acc(double[:, ::1] A, double[:, ::1] B, double[::1] g,
                  Py_ssize_t o) noexcept nogil:
    # g[o + j*B.cols + k] += sum_i A[i, j] * B[i, k]
    cdef Py_ssize_t i, j, k, cols = B.shape[1]
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            for k in range(cols):
                g[o + j * cols + k] += A[i, j] * B[i, k]


cdef void colsum_acc(double[:, ::1] A, double[::1] g, Py_ssize_t o) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            g[o + j] += A[i, j]


cdef void add_into(double[:, ::1] A, double[:, ::1] B) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            A[i, j] += B[i, j]


cdef void ew_mul_dact(double[:, ::1] A, double[:, ::1] V,
                      double[:, ::1] out) noexcept nogil:
    # out = A * dact(V)
    cdef Py_ssize_t i, j
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            out[i, j] = A[i, j] * c_dact(V[i, j])


cdef void act_into(double[:, ::1] src, double[:, ::1] dst) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(src.shape[0]):
        for j in range(src.shape[1]):
            dst[i, j] = c_act(src[i, j])


cdef void act_add_into(double[:, ::1] src, double[:, ::1] res,
                       double[:, ::1] dst) noexcept nogil:
    # dst = act(src) + res
    cdef Py_ssize_t i, j
    for i in range(src.shape[0]):
        for j in range(src.shape[1]):
            dst[i, j] = c_act(src[i, j]) + res[i, j]


cdef void head_into(double[:, ::1] h, double[::1] th, Py_ssize_t ow,
                    Py_ssize_t ob, double[::1] y) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(h.shape[0]):
        s = th[ob]
        for j in range(h.shape[1]):
            s += h[i, j] * th[ow + j]
        y[i] = s


cdef void check_len(double[::1] theta, Offs o) except *:
    if theta.shape[0] != o.total:
        raise ValueError(
            f"parameter vector has length {theta.shape[0]}, expected {o.total}")


def param_count(Py_ssize_t m, Py_ssize_t d):
    return get_offs(m, d).total


def forward(double[::1] theta, Py_ssize_t m, Py_ssize_t d, double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0]
    cdef Offs o = get_offs(m, d)
    check_len(theta, o)
    buf = np.empty((3, n, m))
    y_arr = np.empty(n)
    cdef double[:, :, ::1] B = buf
    cdef double[::1] y = y_arr
    with nogil:
        lin_t(X, theta, o.w_in, o.b_in, m, d, B[0])
        act_into(B[0], B[0])                       # h0
        lin_t(B[0], theta, o.A1, o.a1, m, m, B[1])
        act_into(B[1], B[1])                       # t1
        lin_t(B[1], theta, o.B1, o.c1, m, m, B[2])
        act_add_into(B[2], B[0], B[1])             # h1
        lin_t(B[1], theta, o.A2, o.a2, m, m, B[0])
        act_into(B[0], B[0])                       # t2
        lin_t(B[0], theta, o.B2, o.c2, m, m, B[2])
        act_add_into(B[2], B[1], B[0])             # h2
        head_into(B[0], theta, o.w_out, o.b_out, y)
    return y_arr


def forward_cache(double[::1] theta, Py_ssize_t m, Py_ssize_t d, double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0]
    cdef Offs o = get_offs(m, d)
    check_len(theta, o)
    C_arr = np.empty((10, n, m))
    y_arr = np.empty(n)
    cdef double[:, :, ::1] C = C_arr
    cdef double[::1] y = y_arr
    with nogil:
        lin_t(X, theta, o.w_in, o.b_in, m, d, C[0])
        act_into(C[0], C[1])
        lin_t(C[1], theta, o.A1, o.a1, m, m, C[2])
        act_into(C[2], C[3])
        lin_t(C[3], theta, o.B1, o.c1, m, m, C[4])
        act_add_into(C[4], C[1], C[5])
        lin_t(C[5], theta, o.A2, o.a2, m, m, C[6])
        act_into(C[6], C[7])
        lin_t(C[7], theta, o.B2, o.c2, m, m, C[8])
        act_add_into(C[8], C[5], C[9])
        head_into(C[9], theta, o.w_out, o.b_out, y)
    return y_arr, C_arr


def backward(double[::1] theta, Py_ssize_t m, Py_ssize_t d, double[:, ::1] X,
             double[:, :, ::1] C, double[::1] ybar):
    cdef Py_ssize_t n = X.shape[0]
    cdef Offs o = get_offs(m, d)
    check_len(theta, o)
    g_arr = np.zeros(o.total)
    work = np.empty((3, n, m))
    cdef double[::1] g = g_arr
    cdef double[:, :, ::1] W = work
    cdef Py_ssize_t i, j
    cdef double s
    with nogil:
        for i in range(n):
            s = ybar[i]
            g[o.b_out] += s
            for j in range(m):
                g[o.w_out + j] += C[9, i, j] * s
                W[0, i, j] = s * theta[o.w_out + j]   # dh2
        ew_mul_dact(W[0], C[8], W[1])                 # dv2
        atb_acc(W[1], C[7], g, o.B2)
        colsum_acc(W[1], g, o.c2)
        mat_n(W[1], theta, o.B2, m, m, W[2])
        ew_mul_dact(W[2], C[6], W[1])                 # ds2
        atb_acc(W[1], C[5], g, o.A2)
        colsum_acc(W[1], g, o.a2)
        mat_n(W[1], theta, o.A2, m, m, W[2])
        add_into(W[0], W[2])                          # dh1
        ew_mul_dact(W[0], C[4], W[1])                 # dv1
        atb_acc(W[1], C[3], g, o.B1)
        colsum_acc(W[1], g, o.c1)
        mat_n(W[1], theta, o.B1, m, m, W[2])
        ew_mul_dact(W[2], C[2], W[1])                 # ds1
        atb_acc(W[1], C[1], g, o.A1)
        colsum_acc(W[1], g, o.a1)
        mat_n(W[1], theta, o.A1, m, m, W[2])
        add_into(W[0], W[2])                          # dh0
        ew_mul_dact(W[0], C[0], W[1])                 # dz0
        atb_acc(W[1], X, g, o.w_in)
        colsum_acc(W[1], g, o.b_in)
    return g_arr


def forward_grad(double[::1] theta, Py_ssize_t m, Py_ssize_t d, double[:, ::1] X):
    y, J, _, _ = forward_grad_cache(theta, m, d, X)
    return y, J


def forward_grad_cache(double[::1] theta, Py_ssize_t m, Py_ssize_t d,
                       double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0]
    cdef Offs o = get_offs(m, d)
    check_len(theta, o)
    C_arr = np.empty((10, n, m))
    T_arr = np.empty((9, d, n, m))
    y_arr = np.empty(n)
    J_arr = np.empty((n, d))
    cdef double[:, :, ::1] C = C_arr
    cdef double[:, :, :, ::1] T = T_arr
    cdef double[::1] y = y_arr
    cdef double[:, ::1] J = J_arr
    cdef Py_ssize_t i, j, k
    cdef double z, da, s
    with nogil:
        lin_t(X, theta, o.w_in, o.b_in, m, d, C[0])
        for i in range(n):
            for j in range(m):
                z = C[0, i, j]
                C[1, i, j] = c_act(z)
                da = c_dact(z)
                for k in range(d):
                    T[0, k, i, j] = da * theta[o.w_in + j * d + k]   # P0
        lin_t(C[1], theta, o.A1, o.a1, m, m, C[2])
        for k in range(d):
            mat_t(T[0, k], theta, o.A1, m, m, T[1, k])               # q1
        for i in range(n):
            for j in range(m):
                z = C[2, i, j]
                C[3, i, j] = c_act(z)
                da = c_dact(z)
                for k in range(d):
                    T[2, k, i, j] = da * T[1, k, i, j]               # T1
        lin_t(C[3], theta, o.B1, o.c1, m, m, C[4])
        for k in range(d):
            mat_t(T[2, k], theta, o.B1, m, m, T[3, k])               # r1
        for i in range(n):
            for j in range(m):
                z = C[4, i, j]
                C[5, i, j] = c_act(z) + C[1, i, j]
                da = c_dact(z)
                for k in range(d):
                    T[4, k, i, j] = da * T[3, k, i, j] + T[0, k, i, j]   # P1
        lin_t(C[5], theta, o.A2, o.a2, m, m, C[6])
        for k in range(d):
            mat_t(T[4, k], theta, o.A2, m, m, T[5, k])               # q2
        for i in range(n):
            for j in range(m):
                z = C[6, i, j]
                C[7, i, j] = c_act(z)
                da = c_dact(z)
                for k in range(d):
                    T[6, k, i, j] = da * T[5, k, i, j]               # T2
        lin_t(C[7], theta, o.B2, o.c2, m, m, C[8])
        for k in range(d):
            mat_t(T[6, k], theta, o.B2, m, m, T[7, k])               # r2
        for i in range(n):
            for j in range(m):
                z = C[8, i, j]
                C[9, i, j] = c_act(z) + C[5, i, j]
                da = c_dact(z)
                for k in range(d):
                    T[8, k, i, j] = da * T[7, k, i, j] + T[4, k, i, j]   # P2
        for i in range(n):
            s = theta[o.b_out]
            for j in range(m):
                s += C[9, i, j] * theta[o.w_out + j]
            y[i] = s
            for k in range(d):
                s = 0.0
                for j in range(m):
                    s += T[8, k, i, j] * theta[o.w_out + j]
                J[i, k] = s
    return y_arr, J_arr, C_arr, T_arr


def fused_backward(double[::1] theta, Py_ssize_t m, Py_ssize_t d,
                   double[:, ::1] X, double[:, :, ::1] C, double[:, :, :, ::1] T,
                   double[::1] ybar, double[:, ::1] Jbar):
    """Gradient of sum(ybar * y) + sum(Jbar * J) w.r.t. the flat parameters."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Offs o = get_offs(m, d)
    check_len(theta, o)
    g_arr = np.zeros(o.total)
    # value-path buffers: 0 = dh, 1 = dv/ds, 2 = matmul temp
    wv = np.empty((3, n, m))
    # tangent-path buffers: 0 = dP, 1 = dr/dq, 2 = dT/matmul temp
    wt = np.empty((3, d, n, m))
    cdef double[::1] g = g_arr
    cdef double[:, :, ::1] W = wv
    cdef double[:, :, :, ::1] Wt = wt
    cdef Py_ssize_t i, j, k
    cdef double s, v, da, dda
    with nogil:
        # head
        for i in range(n):
            s = ybar[i]
            g[o.b_out] += s
            for j in range(m):
                g[o.w_out + j] += C[9, i, j] * s
                W[0, i, j] = s * theta[o.w_out + j]           # dh2
                for k in range(d):
                    g[o.w_out + j] += T[8, k, i, j] * Jbar[i, k]
                    Wt[0, k, i, j] = Jbar[i, k] * theta[o.w_out + j]   # dP2
        # dv2 = dh2*dact(v2) + sum_k dP2*ddact(v2)*r2 ; dr2 = dP2*dact(v2)
        for i in range(n):
            for j in range(m):
                v = C[8, i, j]
                da = c_dact(v)
                dda = c_ddact(v)
                s = W[0, i, j] * da
                for k in range(d):
                    s += Wt[0, k, i, j] * dda * T[7, k, i, j]
                    Wt[1, k, i, j] = Wt[0, k, i, j] * da
                W[1, i, j] = s
        atb_acc(W[1], C[7], g, o.B2)
        for k in range(d):
            atb_acc(Wt[1, k], T[6, k], g, o.B2)
        colsum_acc(W[1], g, o.c2)
        mat_n(W[1], theta, o.B2, m, m, W[2])                  # dt2
        for k in range(d):
            mat_n(Wt[1, k], theta, o.B2, m, m, Wt[2, k])      # dT2
        # ds2 = dt2*dact(s2) + sum_k dT2*ddact(s2)*q2 ; dq2 = dT2*dact(s2)
        for i in range(n):
            for j in range(m):
                v = C[6, i, j]
                da = c_dact(v)
                dda = c_ddact(v)
                s = W[2, i, j] * da
                for k in range(d):
                    s += Wt[2, k, i, j] * dda * T[5, k, i, j]
                    Wt[1, k, i, j] = Wt[2, k, i, j] * da
                W[1, i, j] = s
        atb_acc(W[1], C[5], g, o.A2)
        for k in range(d):
            atb_acc(Wt[1, k], T[4, k], g, o.A2)
        colsum_acc(W[1], g, o.a2)
        mat_n(W[1], theta, o.A2, m, m, W[2])
        add_into(W[0], W[2])                                  # dh1
        for k in range(d):
            mat_n(Wt[1, k], theta, o.A2, m, m, Wt[2, k])
            add_into(Wt[0, k], Wt[2, k])                      # dP1
        # block 1 (same pattern)
        for i in range(n):
            for j in range(m):
                v = C[4, i, j]
                da = c_dact(v)
                dda = c_ddact(v)
                s = W[0, i, j] * da
                for k in range(d):
                    s += Wt[0, k, i, j] * dda * T[3, k, i, j]
                    Wt[1, k, i, j] = Wt[0, k, i, j] * da
                W[1, i, j] = s
        atb_acc(W[1], C[3], g, o.B1)
        for k in range(d):
            atb_acc(Wt[1, k], T[2, k], g, o.B1)
        colsum_acc(W[1], g, o.c1)
        mat_n(W[1], theta, o.B1, m, m, W[2])
        for k in range(d):
            mat_n(Wt[1, k], theta, o.B1, m, m, Wt[2, k])
        for i in range(n):
            for j in range(m):
                v = C[2, i, j]
                da = c_dact(v)
                dda = c_ddact(v)
                s = W[2, i, j] * da
                for k in range(d):
                    s += Wt[2, k, i, j] * dda * T[1, k, i, j]
                    Wt[1, k, i, j] = Wt[2, k, i, j] * da
                W[1, i, j] = s
        atb_acc(W[1], C[1], g, o.A1)
        for k in range(d):
            atb_acc(Wt[1, k], T[0, k], g, o.A1)
        colsum_acc(W[1], g, o.a1)
        mat_n(W[1], theta, o.A1, m, m, W[2])
        add_into(W[0], W[2])                                  # dh0
        for k in range(d):
            mat_n(Wt[1, k], theta, o.A1, m, m, Wt[2, k])
            add_into(Wt[0, k], Wt[2, k])                      # dP0
        # input layer
        for i in range(n):
            for j in range(m):
                v = C[0, i, j]
                da = c_dact(v)
                dda = c_ddact(v)
                s = W[0, i, j] * da
                for k in range(d):
                    s += Wt[0, k, i, j] * dda * theta[o.w_in + j * d + k]
                W[1, i, j] = s                                # dz0
        atb_acc(W[1], X, g, o.w_in)
        colsum_acc(W[1], g, o.b_in)
        for i in range(n):
            for j in range(m):
                da = c_dact(C[0, i, j])
                for k in range(d):
                    g[o.w_in + j * d + k] += Wt[0, k, i, j] * da
    return g_arr
