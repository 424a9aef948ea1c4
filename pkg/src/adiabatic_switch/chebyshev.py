"""Chebyshev-Gauss-Lobatto collocation on [0, 1]."""

from __future__ import annotations

import numpy as np
from scipy.fft import dct

NODE_HIT_TOL = 4.0 * np.finfo(float).eps


def lobatto_nodes(M: int) -> np.ndarray:
    """Ascending nodes s_k = (1 - cos(pi k / (M-1))) / 2, k = 0..M-1."""
    if M < 2:
        raise ValueError("need at least two nodes")
    n = M - 1
    k = np.arange(M)
    # sin^2 form is accurate near s = 0; mirror for exact symmetry about 1/2
    s = np.sin(0.5 * np.pi * k / n) ** 2
    upper = 2 * k > n
    s[upper] = 1.0 - s[n - k[upper]]
    if n % 2 == 0:
        s[n // 2] = 0.5
    return s


def differentiation_matrix(M: int) -> np.ndarray:
    """D with (D u)_i ~ u'(s_i) on the ascending nodes of ``lobatto_nodes``.

    Off-diagonal entries follow the classical formula on x = cos(pi k/(M-1));
    the diagonal uses the negative-sum trick, and the map x = 1 - 2s
    contributes the factor -2.
    """
    n = M - 1
    k = np.arange(M)
    x = np.cos(np.pi * k / n)
    c = np.ones(M)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** k
    dx = x[:, None] - x[None, :]
    Dx = np.outer(c, 1.0 / c) / (dx + np.eye(M))
    Dx -= np.diag(Dx.sum(axis=1))
    return -2.0 * Dx


def barycentric_weights(M: int) -> np.ndarray:
    w = (-1.0) ** np.arange(M)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def barycentric_interpolate(nodes, values, s):
    """Interpolate node values (first axis = node) at points ``s``.

    ``s`` is clipped to [nodes[0], nodes[-1]]; points within a few ulps of
    a node return the stored value (avoids overflow of the weights).
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values)
    w = barycentric_weights(len(nodes))
    s_arr = np.atleast_1d(np.clip(np.asarray(s, dtype=float), nodes[0], nodes[-1]))
    out = np.empty((len(s_arr),) + values.shape[1:], dtype=values.dtype)
    flat = values.reshape(len(nodes), -1)
    for i, si in enumerate(s_arr):
        diff = si - nodes
        hit = np.nonzero(np.abs(diff) <= NODE_HIT_TOL)[0]
        if hit.size:
            out[i] = values[hit[0]]
            continue
        t = w / diff
        out[i] = (t @ flat / t.sum()).reshape(values.shape[1:])
    return out[0] if np.ndim(s) == 0 else out


def chebyshev_coefficients(values) -> np.ndarray:
    """Chebyshev coefficients (first axis) of node values via a type-I DCT.

    The nodes are ordered so that x = 1 - 2s runs from 1 to -1, which is
    exactly the DCT-I sampling order.
    """
    values = np.asarray(values)
    M = values.shape[0]
    coeffs = dct(values, type=1, axis=0) / (M - 1)
    coeffs[0] *= 0.5
    coeffs[-1] *= 0.5
    return coeffs


def tail_ratio(values, n_tail: int = 8) -> float:
    """max |trailing coefficients| / max |coefficients| over all columns."""
    co = np.abs(chebyshev_coefficients(np.asarray(values)))
    co = co.reshape(co.shape[0], -1)
    lead = co.max()
    if lead == 0.0:
        return 0.0
    return float(co[-n_tail:].max() / lead)
