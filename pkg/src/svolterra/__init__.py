"""Stochastic Volterra equations in Hilbert space: resolvents, noise, convolutions and checks."""

__version__ = "0.1.0"

from .core import BACKEND
from .grid import GridError, TimeGrid
from .kernels import (
    ConstantKernel,
    ExponentialKernel,
    FractionalKernel,
    Kernel,
    KernelError,
    LinearKernel,
    TabulatedKernel,
    analytic_resolvent,
    eval_kernel,
    kernel_from_spec,
    mittag_leffler,
)
from .spectral import HilbertSchmidtOperator, SpectralSpace, hs_norm
from .resolvent import ResolventFamily, build_family, resolvent_residual, sup_norm
from .noise import NoisePath, sample_increments, sample_path
from .convolution import AdaptedModulated, ConstantB, DeterministicModulated, mild_solution, stochastic_convolution
from .config import ConfigError, RunConfig, parse_config

__all__ = [
    "__version__",
    "BACKEND",
    "GridError",
    "TimeGrid",
    "Kernel",
    "KernelError",
    "ConstantKernel",
    "LinearKernel",
    "FractionalKernel",
    "ExponentialKernel",
    "TabulatedKernel",
    "analytic_resolvent",
    "eval_kernel",
    "kernel_from_spec",
    "mittag_leffler",
    "SpectralSpace",
    "HilbertSchmidtOperator",
    "hs_norm",
    "ResolventFamily",
    "build_family",
    "resolvent_residual",
    "sup_norm",
    "NoisePath",
    "sample_path",
    "sample_increments",
    "ConstantB",
    "DeterministicModulated",
    "AdaptedModulated",
    "stochastic_convolution",
    "mild_solution",
    "ConfigError",
    "RunConfig",
    "parse_config",
]
