"""Backend selection for the hot loops.

The compiled extension ``svolterra._core`` is used when it imports; otherwise
the numpy fallback is used.  Set ``SVOLTERRA_PURE_PYTHON=1`` to force the
fallback.  ``fft_causal_convolve`` is a third route for long lag sums; it is
backend independent.
"""

import os

import numpy as np
from scipy import fft as _fft

from . import _fallback

BACKEND = "python"
if os.environ.get("SVOLTERRA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _compiled
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None
    else:
        BACKEND = "cython"
else:
    _compiled = None

_impl = _compiled if _compiled is not None else _fallback

volterra_solve = _impl.volterra_solve
causal_convolve_direct = _impl.causal_convolve


def fft_causal_convolve(kern, sig):
    """Same contract as :func:`causal_convolve_direct`, via zero-padded real FFTs."""
    kern = np.asarray(kern, dtype=float)
    sig = np.asarray(sig, dtype=float)
    L = sig.shape[-1]
    size = _fft.next_fast_len(2 * L - 1, real=True)
    kf = _fft.rfft(kern, size, axis=-1)
    sf = _fft.rfft(sig, size, axis=-1)
    return _fft.irfft(sf * kf[None], size, axis=-1)[..., :L]


def causal_convolve(kern, sig, method="auto"):
    """Causal lag sum ``out[p,k,n] = sum_{m<=n} kern[k,m] sig[p,k,n-m]``.

    ``method`` is ``"direct"``, ``"fft"`` or ``"auto"`` (FFT once the series
    is long enough for it to pay off).
    """
    if method == "auto":
        method = "fft" if np.shape(sig)[-1] > 48 else "direct"
    if method == "fft":
        return fft_causal_convolve(kern, sig)
    if method == "direct":
        return causal_convolve_direct(kern, sig)
    raise ValueError(f"unknown convolution method {method!r}")
