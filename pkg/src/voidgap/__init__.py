"""Band-gap asymptotics for periodic waveguides perforated by small voids,
with a direct quasi-periodic cell solver to check them."""

from .cell_oracle import (BandStructure, CellSpectrum, compute_bands, fit_epsilon_cubed,
                          solve_cell_problem)
from .cross_modes import ModeSet, analytic_cross_modes, eval_mode, solve_cross_modes
from .dispersion import (DispersionLattice, gap_precondition, lattice_eigenvalue,
                         ordered_spectrum, unperturbed_curves)
from .errors import VoidGapError
from .gap_asymptotics import (CouplingCoefficients, GapReport, correction_away_from_pi,
                              correction_near_pi, coupling_coefficients, find_F1_zero_locus,
                              gap_interval, layer_monopole_coefficient)
from .geometry import (CellGeometry, CrossSection, VoidShape, make_cell, rescale_period,
                       void_measure)
from .virtual_mass import (VirtualMassTensor, analytic_virtual_mass, compute_virtual_mass,
                           solve_exterior_neumann)

__version__ = "0.1.0"

__all__ = [
    "BandStructure", "CellGeometry", "CellSpectrum", "CouplingCoefficients", "CrossSection",
    "DispersionLattice", "GapReport", "ModeSet", "VirtualMassTensor", "VoidGapError",
    "VoidShape", "analytic_cross_modes", "analytic_virtual_mass", "compute_bands",
    "compute_virtual_mass", "correction_away_from_pi", "correction_near_pi",
    "coupling_coefficients", "eval_mode", "find_F1_zero_locus", "fit_epsilon_cubed",
    "gap_interval", "gap_precondition", "lattice_eigenvalue", "layer_monopole_coefficient",
    "make_cell", "ordered_spectrum", "rescale_period", "solve_cell_problem",
    "solve_cross_modes", "solve_exterior_neumann", "unperturbed_curves", "void_measure",
]
