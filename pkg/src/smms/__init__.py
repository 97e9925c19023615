"""Verification toolkit for smooth metric measure spaces.

Certify nonnegative Bakry-Emery curvature hypotheses by sampling,
transport weighted volume elements along normal geodesic bundles,
evaluate both sides of the boundary Willmore-type inequality, and
confirm equality on the rigidity models.
"""

from .certify import (CertificationReport, CheckResult, SampleSpec,
                      certify_hypotheses)
from .comparison import (ComparisonVerdict, auxiliary_h,
                         check_theta_monotone, check_volume_element_bound,
                         compare_mean_curvature, model_mean_curvature,
                         myers_diameter_bound, willmore_gap)
from .config import ConfigError, Numerics, ScenarioConfig, load_config
from .curvature import bakry_emery, min_generalized_eigenvalue, ricci
from .expr import ExprDomainError, ExprError, ExprSyntaxError, parse_expr
from .fields import INFINITE, Box, DensityField, MetricField, Smms
from .models import (MODEL_NAMES, ModelSpec, build_model,
                     warped_ball_volume_oracle, warped_product_smms)
from .runner import (Report, ScenarioError, emit_report, exit_code,
                     run_scenario)
from .spheres import ball_volume_coefficient, sphere_area
from .surfaces import (WILLMORE_MODES, Embedding, HypothesisWarning,
                       ShapeData, shape_operator, surface_integrate,
                       surface_nodes, weighted_mean_curvature, willmore_lhs)
from .transport import (RadialTransport, TransportOptions, point_transport,
                        radial_transport, transport_rays)
from .volume import (ResolutionWarning, ThetaSeries, TubeSpec, avr_estimate,
                     focal_time, theta_f, tube_volume, weighted_ball_volume)

__version__ = "0.1.0"

__all__ = [
    "INFINITE", "MODEL_NAMES", "WILLMORE_MODES",
    "Box", "CertificationReport", "CheckResult", "ComparisonVerdict",
    "ConfigError", "DensityField", "Embedding", "HypothesisWarning",
    "MetricField", "ModelSpec", "Numerics", "RadialTransport", "Report",
    "ResolutionWarning", "SampleSpec", "ScenarioConfig", "ScenarioError",
    "ShapeData", "Smms", "ThetaSeries", "TransportOptions", "TubeSpec",
    "ExprDomainError", "ExprError", "ExprSyntaxError",
    "auxiliary_h", "avr_estimate", "bakry_emery", "ball_volume_coefficient",
    "build_model", "certify_hypotheses", "check_theta_monotone",
    "check_volume_element_bound", "compare_mean_curvature", "emit_report",
    "exit_code", "focal_time", "load_config", "min_generalized_eigenvalue",
    "model_mean_curvature", "myers_diameter_bound", "parse_expr",
    "point_transport", "radial_transport", "ricci", "run_scenario",
    "shape_operator", "sphere_area", "surface_integrate", "surface_nodes",
    "theta_f", "transport_rays", "tube_volume", "warped_ball_volume_oracle",
    "warped_product_smms", "weighted_ball_volume", "weighted_mean_curvature",
    "willmore_gap", "willmore_lhs",
]
