"""Stationary max-stable random fields: simulation, dependence measures and
Monte Carlo checks of the central limit theorem for their functionals."""

from __future__ import annotations

from .clt import (
    CltReport,
    ReplicateTable,
    Sigma2Estimate,
    clt_experiment,
    clt_report,
    decompose_boundary,
    estimate_sigma2_cubes,
    estimate_sigma2_integral,
    normality_stats,
    normalized_integral,
    run_replicates,
)
from .dependence import (
    estimate_cz,
    estimate_nu,
    estimate_nu_curve,
    estimate_theta_areal,
    estimate_theta_pair,
    fit_decay,
    mixing_alpha_bound,
    theta_closed_form,
)
from .errors import (
    EstimationError,
    InputError,
    InvariantError,
    MaxStabError,
    NumericalError,
    SimulationError,
)
from .functionals import CostFunctional, deductible_loss, expected_loss_analytic
from .gaussian import FBFSampler, PowerVariogram, fbf_covariance, sample_fbf
from .models import (
    BrownResnickModel,
    FieldRealization,
    GridSpec,
    SimulationControl,
    SmithModel,
    model_from_dict,
)
from .regions import Box, VanHoveSequence, van_hove_squares
from .risk import RiskReport, gaussian_approx, homogeneity_slope, risk_experiment, risk_report
from .simulate import FieldSimulator, margin_check, sample_brown_resnick, sample_smith

__version__ = "0.1.0"
