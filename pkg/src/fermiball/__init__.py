"""Numerical toolkit for the lattice Fermi ball, Fermi-surface patch
decompositions, Bogoliubov-kernel diagonalization, and RPA correlation
energies."""

from .bogokernel import (
    BogoliubovSolution,
    DiagonalizationError,
    EmptyModeSystemError,
    ModeSystem,
    build_mode_system,
    check_frakK_minus_D_bound,
    check_frakK_vs_E,
    check_kernel_bound,
    check_L_blocks,
    diagonalize,
    dump_solution_csv,
    sample_mode_system,
)
from .lattice import (
    KAPPA_IDEAL,
    FermiBall,
    InteractionPotential,
    Momentum,
    annulus_count_vs_area,
    build_fermi_ball,
    count_slice,
    dispersion,
    equator_reciprocal_sum,
    excitation_energy,
    hartree_fock_energy,
    kinetic_reciprocal_sum,
    shell_pairs,
)
from .patches import (
    ModeIndexSet,
    PatchConstructionError,
    PatchDecomposition,
    build_patches,
    decomposition_to_json,
    index_sets,
    pair_count,
    patch_of,
)
from .rpa import (
    RpaReport,
    rpa_energy_analytic,
    rpa_energy_trace,
    rpa_mode_integral,
    small_v_quadratic_coefficient,
)

__version__ = "0.1.0"

__all__ = [
    "KAPPA_IDEAL",
    "Momentum",
    "FermiBall",
    "InteractionPotential",
    "build_fermi_ball",
    "dispersion",
    "shell_pairs",
    "kinetic_reciprocal_sum",
    "equator_reciprocal_sum",
    "count_slice",
    "annulus_count_vs_area",
    "hartree_fock_energy",
    "excitation_energy",
    "PatchDecomposition",
    "PatchConstructionError",
    "ModeIndexSet",
    "build_patches",
    "patch_of",
    "index_sets",
    "pair_count",
    "decomposition_to_json",
    "ModeSystem",
    "BogoliubovSolution",
    "DiagonalizationError",
    "EmptyModeSystemError",
    "build_mode_system",
    "sample_mode_system",
    "diagonalize",
    "check_kernel_bound",
    "check_L_blocks",
    "check_frakK_vs_E",
    "check_frakK_minus_D_bound",
    "dump_solution_csv",
    "RpaReport",
    "rpa_mode_integral",
    "rpa_energy_analytic",
    "rpa_energy_trace",
    "small_v_quadratic_coefficient",
    "__version__",
]
