"""Forward problem: moving sources, spectral and finite-difference solvers, data extraction."""
from .data import (BoundaryLayout, CauchyData, decay_functional, extract_cauchy, final_state_norm,
                   modal_functional, normal_derivative)
from .fdoracle import StabilityWarning, laplacian_5pt, solve_fd_oracle
from .kernels import KernelWeights, convolve_modes, kernel_values
from .solver import SpectralField, sample_source, solve_from_coefficients, solve_spectral, time_derivative
from .sources import (BumpProfile, LinearMotion, ModalSource, Orbit, ProfileSum, SupportViolationError,
                      project_function, source_coefficients, source_rate_coefficients)

__all__ = [
    "BoundaryLayout", "CauchyData", "decay_functional", "extract_cauchy", "final_state_norm",
    "modal_functional", "normal_derivative", "StabilityWarning", "laplacian_5pt", "solve_fd_oracle",
    "KernelWeights", "convolve_modes", "kernel_values", "SpectralField", "sample_source",
    "solve_from_coefficients", "solve_spectral", "time_derivative", "BumpProfile", "LinearMotion",
    "ModalSource", "Orbit", "ProfileSum", "SupportViolationError", "project_function", "source_coefficients",
    "source_rate_coefficients",
]
