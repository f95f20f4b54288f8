"""Numerical laboratory for a quantum particle in a tilted two-sublattice
square lattice: Wannier-Stark band ladders (two independent methods),
strong/weak-field asymptotics, wave-packet ballistic spreading and
interband Landau-Zener dynamics."""

from .lattice import (
    LATTICE_I,
    LATTICE_II,
    PRESETS,
    FieldSpec,
    LatticeParams,
    Orientation,
    bloch_bands,
    bloch_hamiltonian,
    canonical_orientation,
    dirac_points,
    frame_convert,
    frame_convert_inverse,
)

__all__ = [
    "LATTICE_I",
    "LATTICE_II",
    "PRESETS",
    "FieldSpec",
    "LatticeParams",
    "Orientation",
    "bloch_bands",
    "bloch_hamiltonian",
    "canonical_orientation",
    "dirac_points",
    "frame_convert",
    "frame_convert_inverse",
]

__version__ = "0.1.0"
