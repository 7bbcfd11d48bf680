"""Scalar memory kernels a(t) and their product-integration weights.

Every kernel exposes pointwise values, the antiderivative ``A(t) = int_0^t a``,
and closed-form cell weights against the two linear hat functions of a uniform
grid.  Those weights make the discrete Volterra convolution exact for
piecewise-linear integrands, which is what keeps weakly singular kernels at
full order.

The static flags ``completely_positive`` and ``three_monotone`` are asserted
per variant by construction; they are not verified symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special

__all__ = [
    "Kernel",
    "ConstantKernel",
    "LinearKernel",
    "FractionalKernel",
    "ExponentialKernel",
    "TabulatedKernel",
    "CellWeights",
    "KernelError",
    "SingularEvaluationError",
    "NotDifferentiableError",
    "eval_kernel",
    "eval_kernel_derivative",
    "kernel_moments",
    "analytic_resolvent",
    "mittag_leffler",
    "kernel_from_spec",
]


class KernelError(ValueError):
    """Invalid kernel parameters or an illegal query."""


class SingularEvaluationError(KernelError):
    """Pointwise evaluation requested at the singularity t = 0."""


class NotDifferentiableError(KernelError):
    """Derivative requested for a kernel outside W^{1,1}."""


class CellWeights(NamedTuple):
    """Product-integration weights on cells ``[c dt, (c+1) dt]``.

    ``left[c]`` integrates the kernel against the hat that is 1 at the left
    end of cell ``c``; ``right[c]`` against the hat that is 1 at its right end.
    """

    left: np.ndarray
    right: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.left + self.right

    @property
    def omega(self) -> np.ndarray:
        """Lag weights ``omega[m] = left[m] + right[m-1]`` (``right[-1] = 0``).

        With these, ``int_0^{t_n} a(t_n - s) f(s) ds`` for piecewise-linear
        ``f`` equals ``sum_{m<=n} omega[m] f[n-m] - left[n] f[0]``; the caller
        needs ``left`` extended by one cell to evaluate the last correction.
        """
        om = self.left.copy()
        om[1:] += self.right[:-1]
        return om


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise KernelError("kernel evaluated at negative time")
    return t


@dataclass(frozen=True)
class Kernel:
    """Base class; subclasses implement the variant formulas."""

    name: str = field(init=False, default="kernel")
    differentiable: bool = field(init=False, default=False)
    completely_positive: bool = field(init=False, default=False)
    three_monotone: bool = field(init=False, default=False)

    def __call__(self, t):
        return self.value(t)

    def value(self, t):
        raise NotImplementedError

    def antiderivative(self, t):
        raise NotImplementedError

    def value_at_zero(self) -> float:
        """``a(0)``; only meaningful for non-singular kernels."""
        return float(self.value(0.0))

    def derivative_kernel(self) -> Kernel:
        raise NotDifferentiableError(f"{self.name} kernel is not differentiable")

    def derivative(self, t):
        if not self.differentiable:
            raise NotDifferentiableError(f"{self.name} kernel is not differentiable")
        return self.derivative_kernel().value(t)

    def cell_weights(self, dt: float, n_steps: int) -> CellWeights:
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    """``a(t) = c``; ``c = 1`` gives the (stochastic) heat equation."""

    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "name", "constant")
        object.__setattr__(self, "differentiable", True)
        object.__setattr__(self, "completely_positive", self.c > 0)
        object.__setattr__(self, "three_monotone", self.c >= 0)

    def value(self, t):
        t = _check_time(t)
        return np.full_like(t, self.c) if t.ndim else float(self.c)

    def antiderivative(self, t):
        return self.c * _check_time(t)

    def derivative_kernel(self):
        return ConstantKernel(0.0)

    def cell_weights(self, dt, n_steps):
        half = np.full(n_steps, 0.5 * self.c * dt)
        return CellWeights(half, half.copy())

    def to_spec(self):
        return {"type": "constant", "c": self.c}


@dataclass(frozen=True)
class LinearKernel(Kernel):
    """``a(t) = t``; the resolvent is the cosine family of the wave equation."""

    def __post_init__(self):
        object.__setattr__(self, "name", "linear")
        object.__setattr__(self, "differentiable", True)

    def value(self, t):
        t = _check_time(t)
        return t if t.ndim else float(t)

    def antiderivative(self, t):
        return 0.5 * _check_time(t) ** 2

    def derivative_kernel(self):
        return ConstantKernel(1.0)

    def cell_weights(self, dt, n_steps):
        c = np.arange(n_steps, dtype=float)
        return CellWeights(dt * dt * (c / 2 + 1 / 6), dt * dt * (c / 2 + 1 / 3))

    def to_spec(self):
        return {"type": "linear"}


def _power_diff(c, p):
    # (c+1)^p - c^p without cancellation for c >= 1
    c = np.asarray(c, dtype=float)
    out = np.empty_like(c)
    small = c < 1
    out[small] = (c[small] + 1) ** p - c[small] ** p
    big = ~small
    cb = c[big]
    out[big] = cb**p * np.expm1(p * np.log1p(1 / cb))
    return out


@dataclass(frozen=True)
class FractionalKernel(Kernel):
    """Riemann-Liouville kernel ``a(t) = t^(alpha-1) / Gamma(alpha)``.

    Singular at 0 for ``alpha < 1``; all cell weights are closed form.
    """

    alpha: float = 0.5

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise KernelError("fractional kernel needs alpha in (0, 2)")
        object.__setattr__(self, "name", "fractional")
        object.__setattr__(self, "differentiable", self.alpha >= 1)
        object.__setattr__(self, "completely_positive", self.alpha <= 1)
        object.__setattr__(self, "three_monotone", self.alpha <= 1)

    def value(self, t):
        t = _check_time(t)
        if self.alpha < 1 and np.any(t == 0):
            raise SingularEvaluationError("fractional kernel with alpha < 1 is singular at t = 0")
        if self.alpha == 1:
            out = np.ones_like(t)
        else:
            with np.errstate(divide="ignore"):
                out = t ** (self.alpha - 1) / math.gamma(self.alpha)
        return out if t.ndim else float(out)

    def antiderivative(self, t):
        return _check_time(t) ** self.alpha / math.gamma(self.alpha + 1)

    def derivative_kernel(self):
        if self.alpha < 1:
            raise NotDifferentiableError("fractional kernel with alpha < 1 is not differentiable")
        if self.alpha == 1:
            return ConstantKernel(0.0)
        return FractionalKernel(self.alpha - 1)

    def cell_weights(self, dt, n_steps):
        al = self.alpha
        c = np.arange(n_steps, dtype=float)
        d0 = _power_diff(c, al)
        d1 = _power_diff(c, al + 1)
        scale = dt**al / math.gamma(al + 2)
        # int_0^1 (c+x)^(al-1) x dx, times Gamma(al) scaling folded into `scale`
        right = scale * (al * d1 - (al + 1) * c * d0)
        total = dt**al / math.gamma(al + 1) * d0
        return CellWeights(total - right, right)

    def to_spec(self):
        return {"type": "fractional", "alpha": self.alpha}


def _one_minus_exp_poly(x):
    # 1 - e^{-x}(1 + x), accurate for small x
    x = np.asarray(x, dtype=float)
    out = -np.expm1(-x) - x * np.exp(-x)
    small = x < 1e-2
    xs = x[small]
    terms = np.zeros_like(xs)
    for k in range(2, 9):
        terms += (-1) ** k * (k - 1) / math.factorial(k) * xs**k
    out[small] = terms
    return out


@dataclass(frozen=True)
class ExponentialKernel(Kernel):
    """``a(t) = scale * exp(-b t)`` with ``b > 0``."""

    b: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.b > 0:
            raise KernelError("exponential kernel needs b > 0")
        object.__setattr__(self, "name", "exponential")
        object.__setattr__(self, "differentiable", True)
        object.__setattr__(self, "completely_positive", self.scale > 0)
        object.__setattr__(self, "three_monotone", self.scale >= 0)

    def value(self, t):
        t = _check_time(t)
        out = self.scale * np.exp(-self.b * t)
        return out if t.ndim else float(out)

    def antiderivative(self, t):
        return self.scale * -np.expm1(-self.b * _check_time(t)) / self.b

    def derivative_kernel(self):
        return ExponentialKernel(self.b, -self.b * self.scale)

    def cell_weights(self, dt, n_steps):
        b = self.b
        x = b * dt
        lead = self.scale * np.exp(-b * dt * np.arange(n_steps, dtype=float))
        total = lead * (-math.expm1(-x)) / b
        right = lead * _one_minus_exp_poly(np.array([x]))[0] / (b * b * dt)
        return CellWeights(total - right, right)

    def to_spec(self):
        return {"type": "exponential", "b": self.b, "scale": self.scale}


_GL2 = np.array([-1.0, 1.0]) / math.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class TabulatedKernel(Kernel):
    """Piecewise-linear interpolant of tabulated values starting at ``t = 0``."""

    times: np.ndarray = None
    values: np.ndarray = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 2:
            raise KernelError("tabulated kernel needs matching 1-d times/values (>= 2 points)")
        if times[0] != 0 or np.any(np.diff(times) <= 0):
            raise KernelError("tabulated times must start at 0 and increase strictly")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "name", "tabulated")

    def _in_range(self, t):
        t = _check_time(t)
        if np.any(t > self.times[-1] * (1 + 1e-12)):
            raise KernelError("tabulated kernel queried beyond its last node")
        return t

    def value(self, t):
        t = self._in_range(t)
        out = np.interp(t, self.times, self.values)
        return out if t.ndim else float(out)

    def antiderivative(self, t):
        t = self._in_range(t)
        cum = np.concatenate([[0.0], np.cumsum(np.diff(self.times) * (self.values[1:] + self.values[:-1]) / 2)])
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        t0 = self.times[idx]
        v0 = self.values[idx]
        v = np.interp(t, self.times, self.values)
        return cum[idx] + (t - t0) * (v0 + v) / 2

    def cell_weights(self, dt, n_steps):
        self._in_range(dt * n_steps)
        left = np.empty(n_steps)
        right = np.empty(n_steps)
        for c in range(n_steps):
            lo, hi = c * dt, (c + 1) * dt
            inner = self.times[(self.times > lo) & (self.times < hi)]
            pts = np.concatenate([[lo], inner, [hi]])
            mid = (pts[1:] + pts[:-1]) / 2
            half = (pts[1:] - pts[:-1]) / 2
            # kernel x hat is quadratic on each piece: 2-point Gauss is exact
            s = (mid[:, None] + half[:, None] * _GL2[None, :]).ravel()
            w = np.repeat(half, 2)
            a = np.interp(s, self.times, self.values)
            x = (s - lo) / dt
            right[c] = np.sum(w * a * x)
            left[c] = np.sum(w * a * (1 - x))
        return CellWeights(left, right)

    def to_spec(self):
        return {"type": "tabulated", "times": self.times.tolist(), "values": self.values.tolist()}


def eval_kernel(k: Kernel, t):
    """Pointwise ``a(t)``."""
    return k.value(t)


def eval_kernel_derivative(k: Kernel, t):
    """Pointwise ``a'(t)``; raises :class:`NotDifferentiableError` if illegal."""
    if np.any(np.asarray(t) <= 0):
        raise KernelError("derivative queried at t <= 0")
    return k.derivative(t)


def kernel_moments(k: Kernel, dt: float, n_steps: int) -> CellWeights:
    """Closed-form product-integration weights for ``n_steps`` cells of width ``dt``."""
    if not dt > 0:
        raise KernelError("dt must be positive")
    if n_steps < 1:
        raise KernelError("n_steps must be >= 1")
    return k.cell_weights(float(dt), int(n_steps))


def mittag_leffler(alpha: float, z: float, tol_digits: int = 17) -> float:
    """One-parameter Mittag-Leffler function ``E_alpha(z)``.

    Uses ``exp`` for ``alpha = 1`` and the scaled complementary error function
    for ``alpha = 1/2`` (``E_{1/2}(z) = exp(z^2) erfc(-z)``).  Other orders sum
    the power series in multiprecision, with the working precision raised to
    absorb the cancellation of alternating terms.
    """
    if alpha == 1:
        return math.exp(z)
    if alpha == 0.5:
        if z <= 0:
            return float(special.erfcx(-z))
        return float(math.exp(z * z) * special.erfc(-z))
    import mpmath

    x = abs(z)
    # log10 of the largest series term, roughly max_n x^n / Gamma(alpha n + 1)
    n_peak = max(1.0, x ** (1 / alpha) / alpha)
    peak = n_peak * math.log10(max(x, 1e-300)) - float(mpmath.log10(mpmath.gamma(alpha * n_peak + 1)))
    dps = tol_digits + max(0, int(math.ceil(peak))) + 5
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        aa = mpmath.mpf(alpha)  # the Gamma argument must not be rounded in double precision
        total = mpmath.mpf(0)
        n = 0
        eps = mpmath.mpf(10) ** (-(tol_digits + 2))
        while True:
            term = zz**n / mpmath.gamma(aa * n + 1)
            total += term
            if n > n_peak and abs(term) < eps * max(abs(total), 1e-300):
                break
            n += 1
            if n > 200_000:
                raise ArithmeticError("Mittag-Leffler series did not converge")
        return float(total)


def analytic_resolvent(k: Kernel, mu: float, t):
    """Closed-form scalar resolvent ``s(t)`` solving ``s = 1 + mu (a * s)``.

    Returns ``None`` when no closed form is known for the kernel.
    """
    t = _check_time(t)
    if isinstance(k, ConstantKernel):
        return np.exp(k.c * mu * t)
    if isinstance(k, LinearKernel):
        if mu < 0:
            return np.cos(math.sqrt(-mu) * t)
        if mu == 0:
            return np.ones_like(t) if t.ndim else 1.0
        return np.cosh(math.sqrt(mu) * t)
    if isinstance(k, ExponentialKernel):
        g = k.scale * mu
        if g == k.b:
            return 1 + k.b * t
        return (k.b - g * np.exp((g - k.b) * t)) / (k.b - g)
    if isinstance(k, FractionalKernel):
        if k.alpha == 1:
            return np.exp(mu * t)
        flat = np.atleast_1d(t)
        vals = np.array([mittag_leffler(k.alpha, mu * float(tt) ** k.alpha) for tt in flat.ravel()])
        return vals.reshape(flat.shape) if t.ndim else float(vals[0])
    return None


def kernel_from_spec(spec: dict) -> Kernel:
    """Build a kernel from a tagged record such as ``{"type": "fractional", "alpha": 0.5}``."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    builders = {
        "constant": lambda: ConstantKernel(float(spec.pop("c", 1.0))),
        "linear": LinearKernel,
        "fractional": lambda: FractionalKernel(float(spec.pop("alpha"))),
        "exponential": lambda: ExponentialKernel(float(spec.pop("b")), float(spec.pop("scale", 1.0))),
        "tabulated": lambda: TabulatedKernel(spec.pop("times"), spec.pop("values")),
    }
    if kind not in builders:
        raise KernelError(f"unknown kernel type {kind!r}")
    try:
        kernel = builders[kind]()
    except KeyError as exc:
        raise KernelError(f"kernel {kind!r} missing parameter {exc.args[0]!r}") from None
    if spec:
        raise KernelError(f"unknown kernel keys for {kind!r}: {sorted(spec)}")
    return kernel
