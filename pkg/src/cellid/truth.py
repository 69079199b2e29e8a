"""Reference parameter sets for synthetic experiments.

None of these numbers are measured. The literature-curve coefficients give
a graphite-like anode and an LFP-like cathode; the synthetic "true" cell adds
a low-SoC anode bump and a high-SoC cathode tail that the literature curves
lack, so the refinement stage has something to find.
"""

import numpy as np

from .curves import ANODE, CATHODE, EXPONENTIALS, GAUSSIANS, CorrectionTerm, EquilibriumCurve
from .spm import FARADAY, CellParameters

ANODE_LITERATURE = (0.0, 0.005, 0.16, -0.03, 0.0, 0.0, -0.01, 2.0, -80.0)
CATHODE_LITERATURE = (3.42, -0.1, -28.5, 30.0, -0.05, -0.9, 30.0)

Q_NOM_AH = 3.2
C_SMAX_N = 31370.0
C_SMAX_P = 22806.0
C_E_AVG = 1000.0
TEMPERATURE = 298.15

TRUE_LIMITS = dict(theta_n_0=0.04, theta_n_100=0.82, theta_p_0=0.92, theta_p_100=0.06)

# Planted features, in SoC of the true limits.
BUMP_AMPLITUDE_V = 0.012
BUMP_CENTER_SOC = 0.15
BUMP_WIDTH_SOC = 0.1
TAIL_AT_FULL_V = 0.02
TAIL_RATE = 12.0


def literature_curves():
    return (EquilibriumCurve(ANODE, ANODE_LITERATURE), EquilibriumCurve(CATHODE, CATHODE_LITERATURE))


def capacity_volume(q_nom_ah, c_smax, theta_span):
    """Electrode volume whose lithium inventory between the limits equals q_nom."""
    return 3600.0 * q_nom_ah / (FARADAY * c_smax * abs(theta_span))


def planted_corrections(limits=TRUE_LIMITS):
    bump = CorrectionTerm(
        GAUSSIANS, limits["theta_n_0"], limits["theta_n_100"],
        gauss_params=[[BUMP_AMPLITUDE_V, BUMP_CENTER_SOC, BUMP_WIDTH_SOC]],
    )
    tail = CorrectionTerm(
        EXPONENTIALS, limits["theta_p_0"], limits["theta_p_100"],
        exp_params=[TAIL_AT_FULL_V * np.exp(-TAIL_RATE), TAIL_RATE, 0.0, 0.0],
    )
    return bump, tail


def true_kinetics(limits=TRUE_LIMITS, q_nom=Q_NOM_AH):
    r_n, r_p = 0.8e-6, 12e-6
    return dict(
        v_n=capacity_volume(q_nom, C_SMAX_N, limits["theta_n_100"] - limits["theta_n_0"]),
        v_p=capacity_volume(q_nom, C_SMAX_P, limits["theta_p_0"] - limits["theta_p_100"]),
        r_sn=r_n,
        r_sp=r_p,
        d_sn=r_n**2 / 2000.0,
        d_sp=r_p**2 / 2500.0,
        k_n=1.0e-6,
        k_p=2.0e-6,
        r_f=0.0385,
    )


def true_cell(planted=True):
    """The synthetic ground-truth cell used by the round-trip experiments."""
    anode, cathode = literature_curves()
    if planted:
        bump, tail = planted_corrections()
        anode = anode.with_changes(correction=bump)
        cathode = cathode.with_changes(correction=tail)
    return CellParameters(
        **true_kinetics(),
        c_smax_n=C_SMAX_N,
        c_smax_p=C_SMAX_P,
        c_e_avg=C_E_AVG,
        **TRUE_LIMITS,
        q_nom=Q_NOM_AH,
        anode=anode,
        cathode=cathode,
        temperature=TEMPERATURE,
    )


# Second-order ECM used as ground truth for the ECM round trip.
TRUE_ECM = dict(r0=(0.0398, 0.0122, -6.5), r1=0.0209, c1=788.0, r2=0.0211, c2=1.0e4)
