"""Numerical tolerances shared by the library and its tests."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12          # relative to max |entry|
    eig_residual: float = 1e-10       # relative to ||A||_F
    biorthogonality: float = 1e-8     # |<L|R>| below this => defective
    unitarity: float = 1e-10
    phase_match: float = 1e-9         # chordal distance of phase factors
    normalization: float = 1e-12
    negative_clamp: float = 1e-14     # F_n above -this is clamped to 0
    internal_negative: float = 1e-10  # F_n below -this is a bug
    undefined_mass: float = 1e-14     # sum F_n below this => meanN undefined
    imag_residue: float = 1e-9        # spectral S_N imaginary part
    unit_eigenvalue: float = 1e-6     # |1 - max|lambda|| for "eigenvalue one"
    degenerate_collapse: float = 1e-14


TOL = Tolerances()
