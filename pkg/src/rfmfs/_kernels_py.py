"""Pure numpy implementation of the batched disk-grid reductions.

Each row of `coefs` is one exponent configuration (cA, cB, cC, cL); the node
exponent is g = cA*x^2 + cB*x + cC*y + cL*ln(1-r^2) + ln(w).  The reductions
return log-sum-exp over node blocks (positive-x nodes first) or the
normalized x-moment.  The compiled twin in _kernels.pyx is selected instead
when available; both must agree to ~1e-12.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _row_chunks(n_rows: int, n_nodes: int) -> int:
    # keep the scratch matrix around 32 MB
    return max(1, min(n_rows, int(4e6 // max(n_nodes, 1)) or 1))


def tilted_logsums(lnw, a, b, c, l, n_pos, coefs):
    """Per-row log-sum-exp over the positive-x and negative-x node blocks."""
    coefs = np.atleast_2d(np.asarray(coefs, dtype=float))
    n_rows = coefs.shape[0]
    basis = np.vstack([a, b, c, l])
    out_pos = np.empty(n_rows)
    out_neg = np.empty(n_rows)
    step = _row_chunks(n_rows, basis.shape[1])
    with np.errstate(invalid="ignore"):
        for lo in range(0, n_rows, step):
            hi = min(lo + step, n_rows)
            g = coefs[lo:hi] @ basis
            g += lnw
            for sl, out in ((slice(0, n_pos), out_pos), (slice(n_pos, None), out_neg)):
                gs = g[:, sl]
                m = gs.max(axis=1)
                finite = m > -np.inf
                s = np.exp(gs - np.where(finite, m, 0.0)[:, None]).sum(axis=1)
                out[lo:hi] = np.where(finite, m + np.log(s), -np.inf)
    return out_pos, out_neg


def tilted_xmean(lnw, a, b, c, l, xs, coefs):
    """Per-row (log integral, x-moment mean) over all nodes."""
    coefs = np.atleast_2d(np.asarray(coefs, dtype=float))
    n_rows = coefs.shape[0]
    basis = np.vstack([a, b, c, l])
    logz = np.empty(n_rows)
    xmean = np.empty(n_rows)
    step = _row_chunks(n_rows, basis.shape[1])
    for lo in range(0, n_rows, step):
        hi = min(lo + step, n_rows)
        g = coefs[lo:hi] @ basis
        g += lnw
        m = g.max(axis=1)
        e = np.exp(g - m[:, None])
        s = e.sum(axis=1)
        logz[lo:hi] = m + np.log(s)
        xmean[lo:hi] = (e @ xs) / s
    return logz, xmean
