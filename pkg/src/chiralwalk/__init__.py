"""Monitored chiral quantum walks on a three-site ring.

First-detection statistics under on-site and tracking stroboscopic
measurement: exact recursions, zero-flux closed forms, survival-operator
spectra, Monte Carlo shot emulation and parameter sweeps.
"""

__version__ = "0.1.0"

from .detection import (DetectionSetup, FirstDetectionDistribution, Protocol, basis_state,
                        chiral_asymmetry_map, dark_state_vector, detection_probability_map,
                        fn_onsite, fn_tracking, first_detection, phase_superposition,
                        recurrence_theorem_prediction, stochastic_matrix)
from .estimators import FirstDetectionEstimator, TrajectorySampler
from .model import (ModelParams, build_hamiltonian, build_qubit_hamiltonian, classify_phase_factors,
                    closed_form_spectrum, matching_curves, unitary)
from .montecarlo import TrajectoryEnsemble, empirical_distribution, sample_onsite, sample_tracking
from .spectra import (crossover_curve, gtar_spectrum, locate_unit_eigenvalues,
                      null_measurement_spectral, survival_spectrum_onsite)

__all__ = [
    "DetectionSetup", "FirstDetectionDistribution", "Protocol", "basis_state", "chiral_asymmetry_map",
    "dark_state_vector", "detection_probability_map", "fn_onsite", "fn_tracking", "first_detection",
    "phase_superposition", "recurrence_theorem_prediction", "stochastic_matrix",
    "FirstDetectionEstimator", "TrajectorySampler",
    "ModelParams", "build_hamiltonian", "build_qubit_hamiltonian", "classify_phase_factors",
    "closed_form_spectrum", "matching_curves", "unitary",
    "TrajectoryEnsemble", "empirical_distribution", "sample_onsite", "sample_tracking",
    "crossover_curve", "gtar_spectrum", "locate_unit_eigenvalues", "null_measurement_spectral",
    "survival_spectrum_onsite",
]
