# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY

cnp.import_array()


def chord_walk(double[:, ::1] verts, double d, Py_ssize_t steps):
    cdef Py_ssize_t m = verts.shape[0] - 1
    cdef Py_ssize_t dim = verts.shape[1]
    cdef Py_ssize_t seg = 0, j, c, done = 0
    cdef double cur[3]
    cdef double a[3]
    cdef double dd, bb, cc, disc, u, l2, acc
    out_arr = np.zeros((steps, dim))
    cdef double[:, ::1] out = out_arr
    cdef bint found
    for c in range(dim):
        cur[c] = verts[0, c]
    for done in range(steps + 1):
        if done == steps:
            break
        found = False
        j = seg
        while j < m:
            acc = 0.0
            for c in range(dim):
                acc += (verts[j + 1, c] - cur[c]) * (verts[j + 1, c] - cur[c])
            if acc >= d * d:
                # first exit of the path from the ball of radius d around cur
                l2 = 0.0
                dd = 0.0
                cc = 0.0
                for c in range(dim):
                    if j == seg:
                        a[c] = cur[c]
                    else:
                        a[c] = verts[j, c]
                    l2 += (verts[j + 1, c] - a[c]) * (verts[j + 1, c] - a[c])
                    dd += (verts[j + 1, c] - a[c]) * (a[c] - cur[c])
                    cc += (a[c] - cur[c]) * (a[c] - cur[c])
                cc -= d * d
                disc = dd * dd - l2 * cc
                if disc < 0.0:
                    disc = 0.0
                u = (-dd + sqrt(disc)) / l2
                if u > 1.0:
                    u = 1.0
                if u < 0.0:
                    u = 0.0
                for c in range(dim):
                    cur[c] = a[c] + u * (verts[j + 1, c] - a[c])
                    out[done, c] = cur[c]
                seg = j
                found = True
                break
            j += 1
        if not found:
            break
    cdef double rem = 0.0
    cdef double res
    if done == steps:
        for c in range(dim):
            rem += (verts[seg + 1, c] - cur[c]) * (verts[seg + 1, c] - cur[c])
        rem = sqrt(rem)
        j = seg + 1
        while j < m:
            acc = 0.0
            for c in range(dim):
                acc += (verts[j + 1, c] - verts[j, c]) * (verts[j + 1, c] - verts[j, c])
            rem += sqrt(acc)
            j += 1
        res = -rem
    else:
        acc = 0.0
        for c in range(dim):
            acc += (verts[m, c] - cur[c]) * (verts[m, c] - cur[c])
        res = (steps - done) * d - sqrt(acc)
    return out_arr, done, res


def frechet_table(double[:, ::1] dist):
    cdef Py_ssize_t p = dist.shape[0], q = dist.shape[1], i, j
    ca_arr = np.empty((p, q))
    cdef double[:, ::1] ca = ca_arr
    cdef double best
    ca[0, 0] = dist[0, 0]
    for i in range(1, p):
        ca[i, 0] = max(ca[i - 1, 0], dist[i, 0])
    for j in range(1, q):
        ca[0, j] = max(ca[0, j - 1], dist[0, j])
    for i in range(1, p):
        for j in range(1, q):
            best = ca[i - 1, j - 1]
            if ca[i - 1, j] < best:
                best = ca[i - 1, j]
            if ca[i, j - 1] < best:
                best = ca[i, j - 1]
            ca[i, j] = best if best > dist[i, j] else dist[i, j]
    return ca_arr


def warp_table(double[:, ::1] cost):
    cdef Py_ssize_t p = cost.shape[0], q = cost.shape[1], i, j
    acc_arr = np.empty((p, q))
    cdef double[:, ::1] acc = acc_arr
    cdef double best
    acc[0, 0] = cost[0, 0]
    for i in range(1, p):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
    for j in range(1, q):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, p):
        for j in range(1, q):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost[i, j] + best
    return acc_arr


def segment_dp(double[::1] s, double[::1] y, double eps, Py_ssize_t min_len, bint l1, double tie_tol):
    cdef Py_ssize_t n = s.shape[0], i, j, t, cnt, best_i, best_cnt
    cdef double ms = 0.0, my = 0.0
    for i in range(n):
        ms += s[i]
        my += y[i]
    ms /= n
    my /= n
    cs_arr = np.empty(n)
    cy_arr = np.empty(n)
    cdef double[::1] cs = cs_arr, cy = cy_arr
    for i in range(n):
        cs[i] = s[i] - ms
        cy[i] = y[i] - my
    P1_arr = np.zeros(n + 1)
    P2_arr = np.zeros(n + 1)
    Q1_arr = np.zeros(n + 1)
    Q2_arr = np.zeros(n + 1)
    PQ_arr = np.zeros(n + 1)
    cdef double[::1] P1 = P1_arr, P2 = P2_arr, Q1 = Q1_arr, Q2 = Q2_arr, PQ = PQ_arr
    for i in range(n):
        P1[i + 1] = P1[i] + cs[i]
        P2[i + 1] = P2[i] + cs[i] * cs[i]
        Q1[i + 1] = Q1[i] + cy[i]
        Q2[i + 1] = Q2[i] + cy[i] * cy[i]
        PQ[i + 1] = PQ[i] + cs[i] * cy[i]
    F_arr = np.full(n + 1, INFINITY)  # F[j+1]: best cost covering 0..j
    C_arr = np.zeros(n + 1, dtype=np.intp)
    prev_arr = np.full(n + 1, -1, dtype=np.intp)
    cand_arr = np.empty(n)
    cdef double[::1] F = F_arr, cand = cand_arr
    cdef Py_ssize_t[::1] C = C_arr, prev = prev_arr
    F[0] = 0.0
    cdef double k, sx, sy, sxx, sxy, syy, alpha, beta, err, r, best, thr
    if n < min_len:
        min_len = n
    for j in range(min_len - 1, n):
        best = INFINITY
        for i in range(0, j - min_len + 2):
            cand[i] = INFINITY
            if F[i] == INFINITY:
                continue
            k = j - i + 1
            sx = P1[j + 1] - P1[i]
            sy = Q1[j + 1] - Q1[i]
            sxx = P2[j + 1] - P2[i] - sx * sx / k
            sxy = PQ[j + 1] - PQ[i] - sx * sy / k
            syy = Q2[j + 1] - Q2[i] - sy * sy / k
            if sxx > 1e-300:
                alpha = sxy / sxx
            else:
                alpha = 0.0
            beta = (sy - alpha * sx) / k
            if l1:
                err = 0.0
                for t in range(i, j + 1):
                    r = cy[t] - alpha * cs[t] - beta
                    err += fabs(r)
            else:
                err = syy - alpha * sxy
                if err < 0.0:
                    err = 0.0
            cand[i] = F[i] + eps + err
            if cand[i] < best:
                best = cand[i]
        if best == INFINITY:
            continue
        thr = best + tie_tol * (1.0 + fabs(best))
        best_i = -1
        best_cnt = 0
        for i in range(0, j - min_len + 2):
            if cand[i] <= thr:
                cnt = C[i] + 1
                if best_i < 0 or cnt < best_cnt:
                    best_i = i
                    best_cnt = cnt
        F[j + 1] = cand[best_i]
        C[j + 1] = best_cnt
        prev[j + 1] = best_i
    starts = []
    j = n
    while j > 0:
        i = prev[j]
        starts.append(i)
        j = i
    starts.reverse()
    return F[n], np.asarray(starts, dtype=np.intp)


def integrate_frames(double[::1] kappa, double[::1] tau, double h, double[:, ::1] F0, bint printed):
    cdef Py_ssize_t n = kappa.shape[0] + 1, i, c
    frames_arr = np.empty((n, 3, 3))
    drift_arr = np.empty(n - 1)
    cdef double[:, :, ::1] fr = frames_arr
    cdef double[::1] drift = drift_arr
    cdef double T[3]
    cdef double N[3]
    cdef double B[3]
    cdef double Tn[3]
    cdef double Nn[3]
    cdef double Bn[3]
    cdef double k, t, k2, t2, h2, h3, h4
    cdef double aTT, aTN, aTB, aNT, aNN, aNB, aBT, aBN, aBB
    cdef double nt, nn, nb, tn, tb, nbd, dev, v, norm
    for c in range(3):
        T[c] = F0[0, c]
        N[c] = F0[1, c]
        B[c] = F0[2, c]
        fr[0, 0, c] = T[c]
        fr[0, 1, c] = N[c]
        fr[0, 2, c] = B[c]
    h2 = h * h
    h3 = h2 * h
    h4 = h3 * h
    for i in range(n - 1):
        k = kappa[i]
        t = tau[i]
        k2 = k * k
        t2 = t * t
        if printed:
            aTT = 1.0 + k2 * h2 / 2.0 + (k2 * k2 + k2 * t2) * h4 / 4.0
            aTN = k * h - (k2 * k - k * t2) * h3 / 6.0
            aBB = 1.0 - t2 * h2 / 2.0 - (k2 * t2 + t2 * t2) * h4 / 24.0
        else:
            aTT = 1.0 - k2 * h2 / 2.0 + (k2 * k2 + k2 * t2) * h4 / 24.0
            aTN = k * h - (k2 * k + k * t2) * h3 / 6.0
            aBB = 1.0 - t2 * h2 / 2.0 + (k2 * t2 + t2 * t2) * h4 / 24.0
        aTB = k * t * h2 / 2.0 - (k2 * k * t + k * t2 * t) * h4 / 24.0
        aNT = -k * h + (k * t2 + k2 * k) * h3 / 6.0
        aNN = 1.0 - (k2 + t2) * h2 / 2.0 + (k2 + t2) * (k2 + t2) * h4 / 24.0
        aNB = t * h - (k2 * t + t2 * t) * h3 / 6.0
        aBT = aTB
        aBN = -t * h + (k2 * t + t2 * t) * h3 / 6.0
        for c in range(3):
            Tn[c] = aTT * T[c] + aTN * N[c] + aTB * B[c]
            Nn[c] = aNT * T[c] + aNN * N[c] + aNB * B[c]
            Bn[c] = aBT * T[c] + aBN * N[c] + aBB * B[c]
        nt = sqrt(Tn[0] * Tn[0] + Tn[1] * Tn[1] + Tn[2] * Tn[2])
        nn = sqrt(Nn[0] * Nn[0] + Nn[1] * Nn[1] + Nn[2] * Nn[2])
        nb = sqrt(Bn[0] * Bn[0] + Bn[1] * Bn[1] + Bn[2] * Bn[2])
        tn = Tn[0] * Nn[0] + Tn[1] * Nn[1] + Tn[2] * Nn[2]
        tb = Tn[0] * Bn[0] + Tn[1] * Bn[1] + Tn[2] * Bn[2]
        nbd = Nn[0] * Bn[0] + Nn[1] * Bn[1] + Nn[2] * Bn[2]
        dev = fabs(nt - 1.0)
        for v in (fabs(nn - 1.0), fabs(nb - 1.0), fabs(tn), fabs(tb), fabs(nbd)):
            if v > dev:
                dev = v
        drift[i] = dev
        for c in range(3):
            T[c] = Tn[c] / nt
        v = Nn[0] * T[0] + Nn[1] * T[1] + Nn[2] * T[2]
        for c in range(3):
            N[c] = Nn[c] - v * T[c]
        norm = sqrt(N[0] * N[0] + N[1] * N[1] + N[2] * N[2])
        for c in range(3):
            N[c] /= norm
        B[0] = T[1] * N[2] - T[2] * N[1]
        B[1] = T[2] * N[0] - T[0] * N[2]
        B[2] = T[0] * N[1] - T[1] * N[0]
        for c in range(3):
            fr[i + 1, 0, c] = T[c]
            fr[i + 1, 1, c] = N[c]
            fr[i + 1, 2, c] = B[c]
    return frames_arr, drift_arr
