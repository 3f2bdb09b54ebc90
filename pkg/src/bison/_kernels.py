"""Compiled single-site updates for the collapsed Gibbs sampler.

All functions operate in place on the arrays of a ``ModelState``:

* ``Yb``  (R+1, K) int64 block count sums, row 0 = null genes;
* ``G``   (R+1,)   summed gene effects per gene group;
* ``sC``  (K,)     summed size factors per spot cluster;
* ``pr``  (R+1,)   gene group sizes; ``nk`` (K,) spot cluster sizes.

Block exposures are ``G[r] * sC[k]``. Per-cell data constants cancel in every
conditional and are never formed.
"""
import math

import numpy as np
from numba import njit

# hyper vector layout
A_MU, B_MU, A_0, B_0, A_PI, B_PI, GAMMA, H = range(8)


@njit(cache=True, nogil=True)
def _lm(y, s, a, b):
    return a * math.log(b) - math.lgamma(a) + math.lgamma(a + y) - (a + y) * math.log(b + s)


@njit(cache=True, nogil=True)
def _lm_gain(y, s, dy, ds, a, b):
    # log marginal of (y+dy, s+ds) minus that of (y, s)
    return (math.lgamma(a + y + dy) - math.lgamma(a + y)
            - (a + y + dy) * math.log(b + s + ds) + (a + y) * math.log(b + s))


@njit(cache=True, nogil=True)
def _draw(logw, u):
    m = logw[0]
    for c in range(1, logw.shape[0]):
        if logw[c] > m:
            m = logw[c]
    total = 0.0
    for c in range(logw.shape[0]):
        total += math.exp(logw[c] - m)
    target = u * total
    acc = 0.0
    for c in range(logw.shape[0]):
        acc += math.exp(logw[c] - m)
        if target < acc:
            return c
    return logw.shape[0] - 1


@njit(cache=True, nogil=True)
def spot_remove(i, Yt, s, z, rho, Yb, sC, nk, acc):
    for r in range(acc.shape[0]):
        acc[r] = 0
    for j in range(Yt.shape[1]):
        acc[rho[j]] += Yt[i, j]
    k = z[i]
    for r in range(acc.shape[0]):
        Yb[r, k] -= acc[r]
    nk[k] -= 1
    sC[k] = sC[k] - s[i] if nk[k] > 0 else 0.0


@njit(cache=True, nogil=True)
def spot_add(i, k, s, z, Yb, sC, nk, acc):
    z[i] = k
    for r in range(acc.shape[0]):
        Yb[r, k] += acc[r]
    nk[k] += 1
    sC[k] += s[i]


@njit(cache=True, nogil=True)
def spot_log_weights(i, s, z, Yb, G, sC, pr, nptr, nidx, b, hyper, acc, logw):
    """Log conditional weights of spot ``i`` (already removed; ``acc`` holds its group sums)."""
    K = sC.shape[0]
    a, bb, h = hyper[A_MU], hyper[B_MU], hyper[H]
    si = s[i]
    for k in range(K):
        logw[k] = b[k]
    for t in range(nptr[i], nptr[i + 1]):
        logw[z[nidx[t]]] += h
    for r in range(1, G.shape[0]):
        if pr[r] == 0:
            continue
        gr = G[r]
        dy = acc[r]
        ds = gr * si
        for k in range(K):
            logw[k] += _lm_gain(Yb[r, k], gr * sC[k], dy, ds, a, bb)


@njit(cache=True, nogil=True)
def gene_remove(j, Y, g, z, rho, Yb, G, pr, rowk):
    for k in range(rowk.shape[0]):
        rowk[k] = 0
    for i in range(Y.shape[1]):
        rowk[z[i]] += Y[j, i]
    r = rho[j]
    for k in range(rowk.shape[0]):
        Yb[r, k] -= rowk[k]
    pr[r] -= 1
    G[r] = G[r] - g[j] if pr[r] > 0 else 0.0


@njit(cache=True, nogil=True)
def gene_add(j, r, g, rho, Yb, G, pr, rowk):
    rho[j] = r
    for k in range(rowk.shape[0]):
        Yb[r, k] += rowk[k]
    pr[r] += 1
    G[r] += g[j]


@njit(cache=True, nogil=True)
def gene_log_weights(j, g, Yb, G, sC, pr, hyper, rowk, logw):
    """Log conditional weights of gene ``j`` (already removed; ``rowk`` holds its cluster sums)."""
    K = sC.shape[0]
    R = G.shape[0] - 1
    p_other = 0
    for r in range(R + 1):
        p_other += pr[r]
    p0 = pr[0]
    n_dg = p_other - p0
    n_empty = 0
    for r in range(1, R + 1):
        if pr[r] == 0:
            n_empty += 1
    gj = g[j]
    stot = 0.0
    for k in range(K):
        stot += sC[k]
    tot = 0
    y0 = 0
    for k in range(K):
        tot += rowk[k]
        y0 += Yb[0, k]

    logw[0] = math.log(hyper[A_PI] + p0) + _lm_gain(
        y0, G[0] * stot, tot, gj * stot, hyper[A_0], hyper[B_0])
    base = math.log(hyper[B_PI] + n_dg) - math.log(hyper[GAMMA] + n_dg)
    a, bb = hyper[A_MU], hyper[B_MU]
    for r in range(1, R + 1):
        if pr[r] > 0:
            lw = base + math.log(pr[r])
        else:
            lw = base + math.log(hyper[GAMMA] / n_empty)
        gr = G[r]
        for k in range(K):
            lw += _lm_gain(Yb[r, k], gr * sC[k], rowk[k], gj * sC[k], a, bb)
        logw[r] = lw


@njit(cache=True, nogil=True)
def log_posterior(z, Yb, G, sC, pr, nk, nptr, nidx, b, hyper):
    """Collapsed log posterior up to a constant shared by all states."""
    R = G.shape[0] - 1
    K = sC.shape[0]
    p = 0
    for r in range(R + 1):
        p += pr[r]
    p0 = pr[0]
    a_pi, b_pi, gam = hyper[A_PI], hyper[B_PI], hyper[GAMMA]
    lp = (math.lgamma(a_pi + p0) + math.lgamma(b_pi + p - p0) - math.lgamma(a_pi + b_pi + p)
          - math.lgamma(a_pi) - math.lgamma(b_pi) + math.lgamma(a_pi + b_pi))
    occupied = 0
    for r in range(1, R + 1):
        if pr[r] > 0:
            occupied += 1
            lp += math.lgamma(pr[r])
    if occupied > 0:
        lp += occupied * math.log(gam)
        for t in range(p - p0):
            lp -= math.log(gam + t)
    lp -= math.lgamma(R + 1) - math.lgamma(R - occupied + 1)

    for k in range(K):
        lp += b[k] * nk[k]
    h = hyper[H]
    for i in range(z.shape[0]):
        for t in range(nptr[i], nptr[i + 1]):
            if nidx[t] > i and z[nidx[t]] == z[i]:
                lp += h

    stot = 0.0
    for k in range(K):
        stot += sC[k]
    for r in range(1, R + 1):
        if pr[r] == 0:
            continue
        for k in range(K):
            if nk[k] > 0:
                lp += _lm(Yb[r, k], G[r] * sC[k], hyper[A_MU], hyper[B_MU])
    if p0 > 0:
        y0 = 0
        for k in range(K):
            y0 += Yb[0, k]
        lp += _lm(y0, G[0] * stot, hyper[A_0], hyper[B_0])
    return lp


@njit(cache=True, nogil=True)
def sweep(Y, Yt, s, g, z, rho, Yb, G, sC, pr, nk, nptr, nidx, b, hyper,
          gene_order, spot_order, u_gene, u_spot, acc, rowk, logw_gene, logw_spot):
    """One Gibbs scan: every gene, then every spot, in the given orders."""
    for t in range(gene_order.shape[0]):
        j = gene_order[t]
        gene_remove(j, Y, g, z, rho, Yb, G, pr, rowk)
        gene_log_weights(j, g, Yb, G, sC, pr, hyper, rowk, logw_gene)
        gene_add(j, _draw(logw_gene, u_gene[t]), g, rho, Yb, G, pr, rowk)
    for t in range(spot_order.shape[0]):
        i = spot_order[t]
        spot_remove(i, Yt, s, z, rho, Yb, sC, nk, acc)
        spot_log_weights(i, s, z, Yb, G, sC, pr, nptr, nidx, b, hyper, acc, logw_spot)
        spot_add(i, _draw(logw_spot, u_spot[t]), s, z, Yb, sC, nk, acc)

    # refresh the float accumulators so rounding drift cannot build up
    for r in range(G.shape[0]):
        G[r] = 0.0
    for j in range(rho.shape[0]):
        G[rho[j]] += g[j]
    for k in range(sC.shape[0]):
        sC[k] = 0.0
    for i in range(z.shape[0]):
        sC[z[i]] += s[i]
    return log_posterior(z, Yb, G, sC, pr, nk, nptr, nidx, b, hyper)


def hyper_vector(hyper) -> np.ndarray:
    return np.array([hyper.alpha_mu, hyper.beta_mu, hyper.alpha_0, hyper.beta_0,
                     hyper.alpha_pi, hyper.beta_pi, hyper.gamma, hyper.h], dtype=np.float64)
