"""Convex domains glued from sphere graphs, with curvature pinching and squeezing-bound certificates."""

from .curvature import (CurvatureRange, TangentVector, normal_curvature, pinch_check, pinch_interval,
                        principal_curvatures, principal_range, region_bounds, remainder_exponent,
                        sampled_extremes, sphere_profile, stack_profile, stage_profile)
from .domain import DomainModel
from .errors import (CertificateRefused, DegenerateVectorError, DomainError, HypothesisViolated,
                     InvariantViolation, NotFound, SearchExhausted)
from .graphs import (Cutoff, GlueStage, GraphStack, Jet2, SphereGraph, cutoff_jet, fd_jet, glue_jet,
                     psi_jet, seam_jumps, stack_jet)
from .reports import CheckReport
from .schedule import (Schedule, ScheduleEntry, SweepConfig, build_schedule, convexity_check,
                       exhaustion_check, find_m, find_n, flat_point_curvature, membership,
                       nested_domains_check, select_epsilon)
from .squeeze import (NormalizedConfig, OsculationData, SqueezeCertificate, build_certificate,
                      cap_inside_check, inclusion_check, lemma_lb, normalize, outer_contains_check,
                      shell_bound)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
