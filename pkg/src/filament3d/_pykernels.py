"""Pure-Python/numpy versions of the hot loops.

Each function has the same signature and semantics as its counterpart in
``_ckernels.pyx``; ``kernels`` picks one of the two at import time.
"""

import math

import numpy as np


def chord_walk(verts, d, steps):
    V = [tuple(row) for row in np.asarray(verts, dtype=float)]
    m = len(V) - 1
    dim = len(V[0])
    cur = V[0]
    seg = 0
    out = np.zeros((steps, dim))
    done = 0
    d2 = d * d
    while done < steps:
        found = False
        j = seg
        while j < m:
            b = V[j + 1]
            if sum((b[c] - cur[c]) ** 2 for c in range(dim)) >= d2:
                a = cur if j == seg else V[j]
                l2 = sum((b[c] - a[c]) ** 2 for c in range(dim))
                dd = sum((b[c] - a[c]) * (a[c] - cur[c]) for c in range(dim))
                cc = sum((a[c] - cur[c]) ** 2 for c in range(dim)) - d2
                disc = max(dd * dd - l2 * cc, 0.0)
                u = min(max((-dd + math.sqrt(disc)) / l2, 0.0), 1.0)
                cur = tuple(a[c] + u * (b[c] - a[c]) for c in range(dim))
                out[done] = cur
                seg = j
                found = True
                break
            j += 1
        if not found:
            break
        done += 1
    if done == steps:
        rem = math.dist(V[seg + 1], cur)
        for j in range(seg + 1, m):
            rem += math.dist(V[j + 1], V[j])
        res = -rem
    else:
        res = (steps - done) * d - math.dist(V[m], cur)
    return out, done, res


def frechet_table(dist):
    dist = np.asarray(dist, dtype=float)
    p, q = dist.shape
    D = dist.tolist()
    ca = [[0.0] * q for _ in range(p)]
    ca[0][0] = D[0][0]
    for i in range(1, p):
        ca[i][0] = max(ca[i - 1][0], D[i][0])
    for j in range(1, q):
        ca[0][j] = max(ca[0][j - 1], D[0][j])
    for i in range(1, p):
        row, up, di = ca[i], ca[i - 1], D[i]
        for j in range(1, q):
            best = min(up[j - 1], up[j], row[j - 1])
            row[j] = best if best > di[j] else di[j]
    return np.array(ca)


def warp_table(cost):
    cost = np.asarray(cost, dtype=float)
    p, q = cost.shape
    C = cost.tolist()
    acc = [[0.0] * q for _ in range(p)]
    acc[0][0] = C[0][0]
    for i in range(1, p):
        acc[i][0] = acc[i - 1][0] + C[i][0]
    for j in range(1, q):
        acc[0][j] = acc[0][j - 1] + C[0][j]
    for i in range(1, p):
        row, up, ci = acc[i], acc[i - 1], C[i]
        for j in range(1, q):
            row[j] = ci[j] + min(up[j - 1], up[j], row[j - 1])
    return np.array(acc)


def segment_dp(s, y, eps, min_len, l1, tie_tol):
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(s)
    cs = s - s.mean()
    cy = y - y.mean()
    P1 = np.concatenate(([0.0], np.cumsum(cs)))
    P2 = np.concatenate(([0.0], np.cumsum(cs * cs)))
    Q1 = np.concatenate(([0.0], np.cumsum(cy)))
    Q2 = np.concatenate(([0.0], np.cumsum(cy * cy)))
    PQ = np.concatenate(([0.0], np.cumsum(cs * cy)))
    F = np.full(n + 1, np.inf)
    C = np.zeros(n + 1, dtype=np.intp)
    prev = np.full(n + 1, -1, dtype=np.intp)
    F[0] = 0.0
    min_len = min(min_len, n)
    for j in range(min_len - 1, n):
        i = np.arange(0, j - min_len + 2)
        k = (j - i + 1).astype(float)
        sx = P1[j + 1] - P1[i]
        sy = Q1[j + 1] - Q1[i]
        sxx = P2[j + 1] - P2[i] - sx * sx / k
        sxy = PQ[j + 1] - PQ[i] - sx * sy / k
        syy = Q2[j + 1] - Q2[i] - sy * sy / k
        alpha = np.where(sxx > 1e-300, sxy / np.where(sxx > 1e-300, sxx, 1.0), 0.0)
        beta = (sy - alpha * sx) / k
        if l1:
            t = np.arange(j + 1)
            R = np.abs(cy[None, : j + 1] - alpha[:, None] * cs[None, : j + 1] - beta[:, None])
            R[t[None, :] < i[:, None]] = 0.0
            err = R.sum(axis=1)
        else:
            err = np.maximum(syy - alpha * sxy, 0.0)
        cand = F[i] + eps + err
        best = cand.min()
        if not np.isfinite(best):
            continue
        thr = best + tie_tol * (1.0 + abs(best))
        ok = np.flatnonzero(cand <= thr)
        cnt = C[ok] + 1
        pick = ok[np.argmin(cnt)]
        F[j + 1] = cand[pick]
        C[j + 1] = C[pick] + 1
        prev[j + 1] = pick
    starts = []
    j = n
    while j > 0:
        i = int(prev[j])
        starts.append(i)
        j = i
    starts.reverse()
    return float(F[n]), np.asarray(starts, dtype=np.intp)


def integrate_frames(kappa, tau, h, F0, printed):
    kappa = np.asarray(kappa, dtype=float).tolist()
    tau = np.asarray(tau, dtype=float).tolist()
    n = len(kappa) + 1
    F0 = np.asarray(F0, dtype=float)
    T, N, B = (list(map(float, F0[r])) for r in range(3))
    frames = np.empty((n, 3, 3))
    drift = np.empty(n - 1)
    frames[0] = F0
    h2, h3, h4 = h * h, h**3, h**4
    for i in range(n - 1):
        k, t = kappa[i], tau[i]
        k2, t2 = k * k, t * t
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
        Tn = [aTT * T[c] + aTN * N[c] + aTB * B[c] for c in range(3)]
        Nn = [aNT * T[c] + aNN * N[c] + aNB * B[c] for c in range(3)]
        Bn = [aBT * T[c] + aBN * N[c] + aBB * B[c] for c in range(3)]
        nt = math.sqrt(Tn[0] ** 2 + Tn[1] ** 2 + Tn[2] ** 2)
        nn = math.sqrt(Nn[0] ** 2 + Nn[1] ** 2 + Nn[2] ** 2)
        nb = math.sqrt(Bn[0] ** 2 + Bn[1] ** 2 + Bn[2] ** 2)
        tn = Tn[0] * Nn[0] + Tn[1] * Nn[1] + Tn[2] * Nn[2]
        tb = Tn[0] * Bn[0] + Tn[1] * Bn[1] + Tn[2] * Bn[2]
        nbd = Nn[0] * Bn[0] + Nn[1] * Bn[1] + Nn[2] * Bn[2]
        drift[i] = max(abs(nt - 1.0), abs(nn - 1.0), abs(nb - 1.0), abs(tn), abs(tb), abs(nbd))
        T = [v / nt for v in Tn]
        v = Nn[0] * T[0] + Nn[1] * T[1] + Nn[2] * T[2]
        N = [Nn[c] - v * T[c] for c in range(3)]
        norm = math.sqrt(N[0] ** 2 + N[1] ** 2 + N[2] ** 2)
        N = [x / norm for x in N]
        B = [T[1] * N[2] - T[2] * N[1], T[2] * N[0] - T[0] * N[2], T[0] * N[1] - T[1] * N[0]]
        frames[i + 1, 0] = T
        frames[i + 1, 1] = N
        frames[i + 1, 2] = B
    return frames, drift
