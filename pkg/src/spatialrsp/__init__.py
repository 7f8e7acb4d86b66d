"""Remote state preparation with spatial qubits and qudits.

Slit-amplitude propagation through a lens, detector postselection, the
polarization-assisted POVM, Bloch-sphere sweeps and slit-array qudit
preparation.
"""

__version__ = "0.1.0"

from .errors import DegeneratePoint, DegenerateWindow, DomainError, QuadratureError
from .geometry import (
    OpticalGeometry,
    Regime,
    classify_regime,
    line_overlaps,
    propagation_params,
    slit_amplitude,
    slit_amplitudes,
)
from .postselect import DetectorWindow, invert_target, prep_figures, remote_state_finite
from .povm import PovmSettings, povm_figures, settings_for_target, total_probability
from .states import BlochPoint, DensityOperator, FigureTriple, PureKet, fidelity, purity
from .sweep import BlochGrid, SweepConfig, Target, run_postselect_sweeps, stats

__all__ = [
    "BlochGrid", "BlochPoint", "DegeneratePoint", "DegenerateWindow", "DensityOperator",
    "DetectorWindow", "DomainError", "FigureTriple", "OpticalGeometry", "PovmSettings",
    "PureKet", "QuadratureError", "Regime", "SweepConfig", "Target", "classify_regime",
    "fidelity", "invert_target", "line_overlaps", "povm_figures", "prep_figures",
    "propagation_params", "purity", "remote_state_finite", "run_postselect_sweeps",
    "settings_for_target", "slit_amplitude", "slit_amplitudes", "stats", "total_probability",
]
