"""Numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and the same stage arithmetic, so both backends agree to
round-off. Used when the extension is not built or ``ELLQ_PURE_PYTHON`` is set.
"""
import numpy as np


def _row_ids(ptr):
    return np.repeat(np.arange(ptr.shape[0] - 1), np.diff(ptr))


def csr_matvec(ptr, ind, val, v, out):
    nrows = ptr.shape[0] - 1
    out[:] = np.bincount(_row_ids(ptr), weights=val * v[ind], minlength=nrows)
    return out


def csr_matvec_t(ptr, ind, val, v, out):
    out[:] = np.bincount(ind, weights=val * v[_row_ids(ptr)], minlength=out.shape[0])
    return out


class _Csr:
    __slots__ = ("rows", "ind", "val", "n")

    def __init__(self, ptr, ind, val):
        self.rows = _row_ids(ptr)
        self.ind = ind
        self.val = val
        self.n = ptr.shape[0] - 1

    def __call__(self, v):
        return np.bincount(self.rows, weights=self.val * v[self.ind], minlength=self.n)


def rk4_steps(g_ptr, g_ind, g_val, gt_ptr, gt_ind, gt_val, x, r, s, dt, nsteps):
    """Advance (x, r, s) in place by ``nsteps`` classical RK4 steps of size ``dt``."""
    g = _Csr(g_ptr, g_ind, g_val)
    gt = _Csr(gt_ptr, gt_ind, gt_val)
    half = 0.5 * dt
    sixth = dt / 6.0
    for _ in range(nsteps):
        kr = -gt(s)
        ks = g(r) - s
        ax = r.copy()
        ar = kr.copy()
        as_ = ks.copy()
        rs = r + half * kr
        ss = s + half * ks

        kr = -gt(ss)
        ks = g(rs) - ss
        ax += 2.0 * rs
        ar += 2.0 * kr
        as_ += 2.0 * ks
        rs = r + half * kr
        ss = s + half * ks

        kr = -gt(ss)
        ks = g(rs) - ss
        ax += 2.0 * rs
        ar += 2.0 * kr
        as_ += 2.0 * ks
        rs = r + dt * kr
        ss = s + dt * ks

        ax += rs
        ar -= gt(ss)
        as_ += g(rs) - ss
        x += sixth * ax
        r += sixth * ar
        s += sixth * as_
