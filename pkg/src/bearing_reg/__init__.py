"""Offset-bias registration for networks of bearing-only sensors.

Pairs of sensors triangulate each target; the difference between two pair
positions depends only on the sensors' angular offsets, which are then
estimated by maximum likelihood and removed before tracking.
"""

from .bias_model import BiasVector, bias_offset, bias_offset_closed_form, factor_terms, h_of_b, unbiased_position
from .crlb import CrlbResult, FisherInfo, crlb, fim, jacobian_h_wrt_b
from .errors import (
    BearingRegError,
    ConfigError,
    DegenerateGeometryError,
    InsufficientSensorsError,
    InvalidArgumentError,
    InvalidCovarianceError,
    NoDataError,
    NumericalFailureError,
    UnobservableBiasError,
)
from .ga import GAResult, GASettings, run_ga
from .geometry import (
    Position2D,
    SensorConfig,
    bearing_from,
    pair_jacobian,
    transform_covariance,
    triangulate,
    wrap_angle,
)
from .pairing import PairingPlan, plan_pairing
from .registration import (
    BiasEstimate,
    PseudoMeasurement,
    build_pseudo_measurements,
    estimate_bias_batch,
    estimate_bias_gated,
    estimate_bias_windowed,
    neg_log_likelihood,
)
from .reports import BearingReport
from .simulator import (
    B_TEST1,
    B_TEST2,
    B_TEST3,
    ClutterModel,
    ScenarioConfig,
    apply_detection_and_clutter,
    canonical_scenario,
    generate_bearings,
    generate_truth,
    monte_carlo,
    prune_and_associate,
    register_centralized,
    run_once,
)
from .tracker import MotionModel, TrackState, correct_bearings, kf_predict, kf_update, position_rmse, run_tracker

__version__ = "0.1.0"
