# cython: language_level=3
"""Compiled CSR products and the fused RK4 stepper for the accumulator flow."""
import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t


cdef inline void _matvec(const idx_t[::1] ptr, const idx_t[::1] ind,
                         const double[::1] val, const double[::1] v,
                         double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(ptr.shape[0] - 1):
        acc = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            acc = acc + val[k] * v[ind[k]]
        out[i] = acc


def csr_matvec(const idx_t[::1] ptr, const idx_t[::1] ind, const double[::1] val,
               const double[::1] v, double[::1] out):
    with nogil:
        _matvec(ptr, ind, val, v, out)
    return np.asarray(out)


def csr_matvec_t(const idx_t[::1] ptr, const idx_t[::1] ind, const double[::1] val,
                 const double[::1] v, double[::1] out):
    cdef Py_ssize_t i, k
    cdef double vi
    with nogil:
        for i in range(out.shape[0]):
            out[i] = 0.0
        for i in range(ptr.shape[0] - 1):
            vi = v[i]
            for k in range(ptr[i], ptr[i + 1]):
                out[ind[k]] = out[ind[k]] + val[k] * vi
    return np.asarray(out)


def rk4_steps(const idx_t[::1] g_ptr, const idx_t[::1] g_ind, const double[::1] g_val,
              const idx_t[::1] gt_ptr, const idx_t[::1] gt_ind, const double[::1] gt_val,
              double[::1] x, double[::1] r, double[::1] s, double dt, Py_ssize_t nsteps):
    """Advance (x, r, s) in place by ``nsteps`` classical RK4 steps of size ``dt``."""
    cdef Py_ssize_t nd = r.shape[0], nf = s.shape[0], step, i
    cdef double half = 0.5 * dt, sixth = dt / 6.0
    cdef double[::1] rs = np.empty(nd), ss = np.empty(nf)
    cdef double[::1] kr = np.empty(nd), ks = np.empty(nf)
    cdef double[::1] ar = np.empty(nd), as_ = np.empty(nf), ax = np.empty(nd)
    cdef double[::1] gr = np.empty(nf), gts = np.empty(nd)
    with nogil:
        for step in range(nsteps):
            # stage 1
            _matvec(gt_ptr, gt_ind, gt_val, s, gts)
            _matvec(g_ptr, g_ind, g_val, r, gr)
            for i in range(nd):
                kr[i] = -gts[i]
                ax[i] = r[i]
                ar[i] = kr[i]
                rs[i] = r[i] + half * kr[i]
            for i in range(nf):
                ks[i] = gr[i] - s[i]
                as_[i] = ks[i]
                ss[i] = s[i] + half * ks[i]
            # stage 2
            _matvec(gt_ptr, gt_ind, gt_val, ss, gts)
            _matvec(g_ptr, g_ind, g_val, rs, gr)
            for i in range(nd):
                kr[i] = -gts[i]
                ax[i] = ax[i] + 2.0 * rs[i]
                ar[i] = ar[i] + 2.0 * kr[i]
            for i in range(nf):
                ks[i] = gr[i] - ss[i]
                as_[i] = as_[i] + 2.0 * ks[i]
            for i in range(nd):
                rs[i] = r[i] + half * kr[i]
            for i in range(nf):
                ss[i] = s[i] + half * ks[i]
            # stage 3
            _matvec(gt_ptr, gt_ind, gt_val, ss, gts)
            _matvec(g_ptr, g_ind, g_val, rs, gr)
            for i in range(nd):
                kr[i] = -gts[i]
                ax[i] = ax[i] + 2.0 * rs[i]
                ar[i] = ar[i] + 2.0 * kr[i]
            for i in range(nf):
                ks[i] = gr[i] - ss[i]
                as_[i] = as_[i] + 2.0 * ks[i]
            for i in range(nd):
                rs[i] = r[i] + dt * kr[i]
            for i in range(nf):
                ss[i] = s[i] + dt * ks[i]
            # stage 4
            _matvec(gt_ptr, gt_ind, gt_val, ss, gts)
            _matvec(g_ptr, g_ind, g_val, rs, gr)
            for i in range(nd):
                ax[i] = ax[i] + rs[i]
                ar[i] = ar[i] - gts[i]
            for i in range(nf):
                as_[i] = as_[i] + (gr[i] - ss[i])
            for i in range(nd):
                x[i] = x[i] + sixth * ax[i]
                r[i] = r[i] + sixth * ar[i]
            for i in range(nf):
                s[i] = s[i] + sixth * as_[i]
