"""Pure numpy versions of the hot kernels in ``_core.pyx``.

Signatures and results match the compiled module exactly up to rounding.
"""

import numpy as np


def volterra_solve(omega, left, mu, forcing):
    """Forward substitution for ``x = f + mu * (a * x)`` by product integration.

    Parameters
    ----------
    omega : (L,) array
        Lag weights, ``omega[m] = left[m] + right[m-1]``.
    left : (L,) array
        Left cell weights (used for the ``x[0]`` end correction).
    mu : (K,) array
        One multiplier per mode.
    forcing : (P, K, L) array

    Returns
    -------
    (P, K, L) array
    """
    omega = np.ascontiguousarray(omega, dtype=float)
    left = np.ascontiguousarray(left, dtype=float)
    mu = np.ascontiguousarray(mu, dtype=float)
    f = np.ascontiguousarray(forcing, dtype=float)
    P, K, L = f.shape
    x = np.empty_like(f)
    x[..., 0] = f[..., 0]
    denom = 1.0 - mu * omega[0]
    for n in range(1, L):
        hist = x[..., n - 1::-1] @ omega[1:n + 1]
        x[..., n] = (f[..., n] + mu * (hist - left[n] * x[..., 0])) / denom
    return x


def causal_convolve(kern, sig):
    """``out[p, k, n] = sum_{m<=n} kern[k, m] * sig[p, k, n - m]``.

    Parameters
    ----------
    kern : (K, L) array
    sig : (P, K, L) array
    """
    kern = np.asarray(kern, dtype=float)
    sig = np.asarray(sig, dtype=float)
    L = sig.shape[-1]
    out = np.zeros(sig.shape)
    for m in range(L):
        out[..., m:] += kern[None, :, m, None] * sig[..., :L - m]
    return out
