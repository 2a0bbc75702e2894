"""Compiled inner loops for phase-space assembly (numpy fallback included)."""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a soft dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f
        return wrap

    prange = range


@njit(parallel=True, cache=True)
def _accumulate_numba(txg, v1g, v2g, txs, v1s, v2s, delta, trace, nx, n1, n2, nl):
    ntx = nl * nl
    nloc = ntx * nl * nl
    ncells = nx * n1 * n2
    out = np.empty((ncells, nloc, nloc))
    for s in prange(ncells):
        sx = s // (n1 * n2)
        r = s % (n1 * n2)
        s1 = r // n2
        s2 = r % n2
        d = delta[s]
        for ut in range(ntx):
            for a in range(nl):
                for b in range(nl):
                    row = (ut * nl + a) * nl + b
                    for vt in range(ntx):
                        for c in range(nl):
                            for e in range(nl):
                                col = (vt * nl + c) * nl + e
                                acc = trace[row, col]
                                for g in range(txg.shape[0]):
                                    acc += txg[g, sx, ut, vt] * v1g[g, s1, a, c] * v2g[g, s2, b, e]
                                for g in range(txs.shape[0]):
                                    acc += d * (txs[g, sx, ut, vt] * v1s[g, s1, a, c]
                                                * v2s[g, s2, b, e])
                                out[s, row, col] = acc
    return out


def _accumulate_numpy(txg, v1g, v2g, txs, v1s, v2s, delta, trace, nx, n1, n2, nl):
    ntx = nl * nl
    nloc = ntx * nl * nl

    def pile(tx, v1, v2):
        buf = np.zeros((nx, n1, n2, ntx, nl, nl, ntx, nl, nl))
        for g in range(tx.shape[0]):
            buf += (tx[g][:, None, None, :, None, None, :, None, None]
                    * v1[g][None, :, None, None, :, None, None, :, None]
                    * v2[g][None, None, :, None, None, :, None, None, :])
        return buf.reshape(nx * n1 * n2, nloc, nloc)

    out = pile(txg, v1g, v2g)
    out += delta[:, None, None] * pile(txs, v1s, v2s)
    out += trace[None]
    return out


def accumulate_local(txg, v1g, v2g, txs, v1s, v2s, delta, trace, cell_grid, nl):
    """Per-cell local matrices: Galerkin groups + delta * SD groups + trace."""
    nx, n1, n2 = cell_grid
    args = (txg, v1g, v2g, txs, v1s, v2s, delta, trace, nx, n1, n2, nl)
    if HAVE_NUMBA:
        return _accumulate_numba(*args)
    return _accumulate_numpy(*args)
