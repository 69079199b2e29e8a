"""Identification pipelines for the SPM and the equivalent circuit model."""

from .ecm_fit import EcmStatic, ecm_static_characterize, fit_ecm_dynamics, fit_exponential
from .equilibrium import (
    EquilibriumFitReport,
    fit_corrections,
    fit_stoichiometry_limits,
    identify_equilibrium,
    predict_ocv,
    reoptimize_limits,
)
from .kinetics import build_kinetics_problem, fit_kinetics
from .metrics import band, rmse, validate
from .ocv import OcvPointSet, extract_ocv_points, find_rests

__all__ = [
    "EcmStatic", "EquilibriumFitReport", "OcvPointSet", "band", "build_kinetics_problem",
    "ecm_static_characterize", "extract_ocv_points", "find_rests", "fit_corrections",
    "fit_ecm_dynamics", "fit_exponential", "fit_kinetics", "fit_stoichiometry_limits",
    "identify_equilibrium", "predict_ocv", "reoptimize_limits", "rmse", "validate",
]
