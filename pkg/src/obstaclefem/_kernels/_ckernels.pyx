# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-element kernels.

Semantics mirror ``pykernels``; see that module for the local dof order
and basis conventions.  Loops release the GIL so the estimate stage can
run chunks on a thread pool.
"""

import numpy as np


cdef inline double _dot2(double ax, double ay, double bx, double by) nogil:
    return ax * bx + ay * by


def cell_matrices(const double[:, :, ::1] coords, const double[::1] areas,
                  const double[:, :, ::1] grads, const double[:, ::1] elen,
                  const double[:, ::1] esign, double beta, int mode):
    if mode not in (0, 1, 2, 3):
        raise ValueError(f"unknown kernel mode {mode}")
    cdef Py_ssize_t n_elem = areas.shape[0]
    out_np = np.zeros((n_elem, 7, 7))
    cdef double[:, :, ::1] out = out_np
    cdef Py_ssize_t e, i, j, q
    cdef double area, w, third
    cdef double c[4]
    cdef double px[3]
    cdef double py[3]
    cdef double scale[3]
    cdef double mx, my, cx, cy
    cdef double phix[3][3]
    cdef double phiy[3][3]
    cdef double ipx[3]
    cdef double ipy[3]
    cdef double acc

    w = 1.0 if mode == 3 else beta
    with nogil:
        for e in range(n_elem):
            area = areas[e]
            for i in range(3):
                px[i] = coords[e, i, 0]
                py[i] = coords[e, i, 1]
                c[i] = esign[e, i] * elen[e, i] / area
                scale[i] = esign[e, i] * elen[e, i] / (2.0 * area)
            c[3] = 1.0

            # weighted divergence block over [s0, s1, s2, lam]
            for i in range(4):
                for j in range(4):
                    out[e, 3 + i, 3 + j] += w * area * c[i] * c[j]

            # gradient block
            for i in range(3):
                for j in range(3):
                    out[e, i, j] = area * _dot2(grads[e, i, 0], grads[e, i, 1],
                                                grads[e, j, 0], grads[e, j, 1])

            # flux basis at the three edge midpoints
            for q in range(3):
                mx = 0.5 * (px[(q + 1) % 3] + px[(q + 2) % 3])
                my = 0.5 * (py[(q + 1) % 3] + py[(q + 2) % 3])
                for j in range(3):
                    phix[q][j] = scale[j] * (mx - px[j])
                    phiy[q][j] = scale[j] * (my - py[j])
            for i in range(3):
                for j in range(3):
                    acc = 0.0
                    for q in range(3):
                        acc += _dot2(phix[q][i], phiy[q][i],
                                     phix[q][j], phiy[q][j])
                    out[e, 3 + i, 3 + j] += (area / 3.0) * acc

            if mode != 3:
                cx = (px[0] + px[1] + px[2]) / 3.0
                cy = (py[0] + py[1] + py[2]) / 3.0
                for j in range(3):
                    ipx[j] = esign[e, j] * elen[e, j] * (cx - px[j]) / 2.0
                    ipy[j] = esign[e, j] * elen[e, j] * (cy - py[j]) / 2.0
                for i in range(3):
                    for j in range(3):
                        acc = -_dot2(grads[e, i, 0], grads[e, i, 1],
                                     ipx[j], ipy[j])
                        out[e, i, 3 + j] += acc
                        out[e, 3 + j, i] += acc

                third = area / 3.0
                if mode == 0:
                    for i in range(3):
                        out[e, i, 6] += 0.5 * third
                        out[e, 6, i] += 0.5 * third
                elif mode == 1:
                    for i in range(3):
                        out[e, i, 6] += third
                else:
                    for i in range(3):
                        out[e, 6, i] += third
    return out_np


def estimator_cells(const double[:, :, ::1] coords, const double[::1] areas,
                    const double[:, :, ::1] grads, const double[:, ::1] elen,
                    const double[:, ::1] esign, const double[:, ::1] u_cell,
                    const double[:, ::1] s_cell, const double[::1] lam,
                    const double[:, ::1] f5, const double[:, ::1] g5,
                    const double[:, ::1] ggx5, const double[:, ::1] ggy5,
                    const double[:, ::1] bary5, const double[::1] w5):
    cdef Py_ssize_t n_elem = areas.shape[0]
    cdef Py_ssize_t nq5 = w5.shape[0]
    out_np = np.empty((n_elem, 5))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t e, i, j, q
    cdef double area, dl, fbar, gux, guy, mx, my, sx, sy, uq, dx, dy
    cdef double px[3]
    cdef double py[3]
    cdef double scale[3]
    cdef double acc1, acc2, acc3, acc4

    with nogil:
        for e in range(n_elem):
            area = areas[e]
            dl = lam[e]
            for i in range(3):
                px[i] = coords[e, i, 0]
                py[i] = coords[e, i, 1]
                scale[i] = esign[e, i] * elen[e, i] / (2.0 * area)
                dl += s_cell[e, i] * esign[e, i] * elen[e, i] / area

            fbar = 0.0
            for q in range(nq5):
                fbar += w5[q] * f5[e, q]
            out[e, 0] = area * (dl + fbar) * (dl + fbar)

            gux = 0.0
            guy = 0.0
            for i in range(3):
                gux += u_cell[e, i] * grads[e, i, 0]
                guy += u_cell[e, i] * grads[e, i, 1]

            acc1 = 0.0
            for q in range(3):
                mx = 0.5 * (px[(q + 1) % 3] + px[(q + 2) % 3])
                my = 0.5 * (py[(q + 1) % 3] + py[(q + 2) % 3])
                sx = 0.0
                sy = 0.0
                for j in range(3):
                    sx += s_cell[e, j] * scale[j] * (mx - px[j])
                    sy += s_cell[e, j] * scale[j] * (my - py[j])
                acc1 += (gux - sx) * (gux - sx) + (guy - sy) * (guy - sy)
            out[e, 1] = (area / 3.0) * acc1

            acc2 = 0.0
            acc3 = 0.0
            acc4 = 0.0
            for q in range(nq5):
                uq = (u_cell[e, 0] * bary5[q, 0] + u_cell[e, 1] * bary5[q, 1]
                      + u_cell[e, 2] * bary5[q, 2])
                if uq > g5[e, q]:
                    acc2 += w5[q] * (uq - g5[e, q])
                else:
                    dx = ggx5[e, q] - gux
                    dy = ggy5[e, q] - guy
                    if g5[e, q] > uq:
                        acc3 += w5[q] * (dx * dx + dy * dy)
                acc4 += w5[q] * (f5[e, q] - fbar) * (f5[e, q] - fbar)
            out[e, 2] = lam[e] * area * acc2
            out[e, 3] = area * acc3
            out[e, 4] = area * acc4
    return out_np


def error_cells(const double[:, :, ::1] coords, const double[::1] areas,
                const double[:, :, ::1] grads, const double[:, ::1] elen,
                const double[:, ::1] esign, const double[:, ::1] u_cell,
                const double[:, ::1] s_cell, const double[::1] lam,
                const double[:, ::1] f5, const double[:, ::1] gux5, const double[:, ::1] guy5,
                const double[:, ::1] sx5, const double[:, ::1] sy5,
                const double[:, ::1] bary5, const double[::1] w5):
    cdef Py_ssize_t n_elem = areas.shape[0]
    cdef Py_ssize_t nq5 = w5.shape[0]
    out_np = np.empty((n_elem, 3))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t e, i, j, q
    cdef double area, dl, gux, guy, qx, qy, sx, sy, ex, ey, r
    cdef double px[3]
    cdef double py[3]
    cdef double scale[3]
    cdef double acc1, acc2, acc3

    with nogil:
        for e in range(n_elem):
            area = areas[e]
            dl = lam[e]
            for i in range(3):
                px[i] = coords[e, i, 0]
                py[i] = coords[e, i, 1]
                scale[i] = esign[e, i] * elen[e, i] / (2.0 * area)
                dl += s_cell[e, i] * esign[e, i] * elen[e, i] / area

            gux = 0.0
            guy = 0.0
            for i in range(3):
                gux += u_cell[e, i] * grads[e, i, 0]
                guy += u_cell[e, i] * grads[e, i, 1]

            acc1 = 0.0
            acc2 = 0.0
            acc3 = 0.0
            for q in range(nq5):
                ex = gux5[e, q] - gux
                ey = guy5[e, q] - guy
                acc1 += w5[q] * (ex * ex + ey * ey)

                qx = (bary5[q, 0] * px[0] + bary5[q, 1] * px[1]
                      + bary5[q, 2] * px[2])
                qy = (bary5[q, 0] * py[0] + bary5[q, 1] * py[1]
                      + bary5[q, 2] * py[2])
                sx = 0.0
                sy = 0.0
                for j in range(3):
                    sx += s_cell[e, j] * scale[j] * (qx - px[j])
                    sy += s_cell[e, j] * scale[j] * (qy - py[j])
                ex = sx5[e, q] - sx
                ey = sy5[e, q] - sy
                acc2 += w5[q] * (ex * ex + ey * ey)

                r = dl + f5[e, q]
                acc3 += w5[q] * r * r
            out[e, 0] = area * acc1
            out[e, 1] = area * acc2
            out[e, 2] = area * acc3
    return out_np
