"""Direct convolution and pooling kernels (numba, CPU).

All kernels read/write NCHW float64 arrays. Accumulation order inside one
output element is fixed: kernel-row-major (ki, kj) with input channels in
blocks of four, so repeated runs are bit-identical. Parallel tasks write
disjoint output rows and never reduce across threads, which keeps the
thread schedule irrelevant to the result.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def conv_forward(xp, wk, bias, stride, out):
    # xp: (N, Cin, Hp, Wp) pre-padded input
    # wk: (K, K, Cin, Cout) repacked kernel, bias: (Cout,)
    # out: (N, Cout, Ho, Wo) preallocated
    N, Cout, Ho, Wo = out.shape
    K = wk.shape[0]
    Cin = wk.shape[2]
    cb = (Cin // 4) * 4
    for t in prange(N * Ho):
        n = t // Ho
        i = t % Ho
        acc = np.empty((Wo, Cout))
        for j in range(Wo):
            for co in range(Cout):
                acc[j, co] = bias[co]
        for ki in range(K):
            y = i * stride + ki
            for kj in range(K):
                for c0 in range(0, cb, 4):
                    x0 = xp[n, c0, y]
                    x1 = xp[n, c0 + 1, y]
                    x2 = xp[n, c0 + 2, y]
                    x3 = xp[n, c0 + 3, y]
                    w0 = wk[ki, kj, c0]
                    w1 = wk[ki, kj, c0 + 1]
                    w2 = wk[ki, kj, c0 + 2]
                    w3 = wk[ki, kj, c0 + 3]
                    for j in range(Wo):
                        p = j * stride + kj
                        a0 = x0[p]
                        a1 = x1[p]
                        a2 = x2[p]
                        a3 = x3[p]
                        arow = acc[j]
                        for co in range(Cout):
                            arow[co] += a0 * w0[co] + a1 * w1[co] + a2 * w2[co] + a3 * w3[co]
                for ci in range(cb, Cin):
                    xr = xp[n, ci, y]
                    wr = wk[ki, kj, ci]
                    for j in range(Wo):
                        xv = xr[j * stride + kj]
                        arow = acc[j]
                        for co in range(Cout):
                            arow[co] += xv * wr[co]
        for co in range(Cout):
            for j in range(Wo):
                out[n, co, i, j] = acc[j, co]


@njit(parallel=True, cache=True)
def conv_weight_grad(xp, dout, stride, dwp):
    # xp: (N, Cin, Hp, Wp), dout: (N, Cout, Ho, Wo)
    # dwp: (N, K, K, Cin, Cout) zero-initialized per-sample partials; the
    # caller sums over axis 0 in sample order to keep the reduction exact.
    N, Cout, Ho, Wo = dout.shape
    K = dwp.shape[1]
    Cin = dwp.shape[3]
    cb = (Cin // 4) * 4
    for n in prange(N):
        dlocal = np.empty((Wo, Cout))
        for i in range(Ho):
            for co in range(Cout):
                for j in range(Wo):
                    dlocal[j, co] = dout[n, co, i, j]
            for ki in range(K):
                y = i * stride + ki
                for kj in range(K):
                    for c0 in range(0, cb, 4):
                        x0 = xp[n, c0, y]
                        x1 = xp[n, c0 + 1, y]
                        x2 = xp[n, c0 + 2, y]
                        x3 = xp[n, c0 + 3, y]
                        d0 = dwp[n, ki, kj, c0]
                        d1 = dwp[n, ki, kj, c0 + 1]
                        d2 = dwp[n, ki, kj, c0 + 2]
                        d3 = dwp[n, ki, kj, c0 + 3]
                        for j in range(Wo):
                            p = j * stride + kj
                            a0 = x0[p]
                            a1 = x1[p]
                            a2 = x2[p]
                            a3 = x3[p]
                            dl = dlocal[j]
                            for co in range(Cout):
                                v = dl[co]
                                d0[co] += a0 * v
                                d1[co] += a1 * v
                                d2[co] += a2 * v
                                d3[co] += a3 * v
                    for ci in range(cb, Cin):
                        xr = xp[n, ci, y]
                        dr = dwp[n, ki, kj, ci]
                        for j in range(Wo):
                            xv = xr[j * stride + kj]
                            dl = dlocal[j]
                            for co in range(Cout):
                                dr[co] += xv * dl[co]


@njit(parallel=True, cache=True)
def maxpool2x_forward(x, out, idx):
    # 2x2/stride-2; idx stores the winning window slot in row-major order
    # (0..3), first occurrence on ties.
    N, C, Ho, Wo = out.shape
    for t in prange(N * C):
        n = t // C
        c = t % C
        for i in range(Ho):
            for j in range(Wo):
                y = 2 * i
                x0 = 2 * j
                best = x[n, c, y, x0]
                b = 0
                v = x[n, c, y, x0 + 1]
                if v > best:
                    best = v
                    b = 1
                v = x[n, c, y + 1, x0]
                if v > best:
                    best = v
                    b = 2
                v = x[n, c, y + 1, x0 + 1]
                if v > best:
                    best = v
                    b = 3
                out[n, c, i, j] = best
                idx[n, c, i, j] = b


@njit(parallel=True, cache=True)
def maxpool2x_backward(dout, idx, dx):
    # dx: (N, C, H, W) zero-initialized
    N, C, Ho, Wo = dout.shape
    for t in prange(N * C):
        n = t // C
        c = t % C
        for i in range(Ho):
            for j in range(Wo):
                b = idx[n, c, i, j]
                dx[n, c, 2 * i + b // 2, 2 * j + b % 2] = dout[n, c, i, j]
