"""Deterministic simulator for downlink rate-splitting with device piggybacking.

Legacy users keep zero-forcing beams and a guaranteed rate; low-power devices
ride those beams. The pipeline schedules devices onto beams (max-min gain
bisection), splits transmit power and the shared-stream rate (quadratic
transform plus a barrier solver), and searches the set of users that decode
the shared stream (annealed bit flips).
"""
from .allocator import (AllocationResult, AuxVariables, alternating_opt,
                        aux_update, convex_step, surrogate_eval)
from .annealing import AnnealResult, anneal, flip_probability
from .channel import (device_channel, element_distances, ff_response,
                      nf_response, rayleigh_distance)
from .config import (SPEED_OF_LIGHT, SystemConfig, config_from_dict,
                     load_config, reference_config)
from .errors import (AllInfeasible, ConfigError, Infeasible, InfeasibleMatrix,
                     NoProgress, RankDeficient, TooLarge, Unassigned)
from .harness import (SCHEMES, SweepResult, TraceBundle, TrialRecord,
                      ValidationReport, convergence_trace, format_summary_rows,
                      format_trace_rows, format_trial_rows, run_trial, sweep,
                      validate_suite)
from .precoding import GainTable, PrecoderSet, gain_tables, zf_precoders
from .rates import (Allocation, BeamAssignment, RateReport, RSSelection,
                    VerifyResult, common_sinr, device_sinr, evaluate,
                    private_sinr, verify_constraints)
from .scenario import PolarLocation, Scenario, sample_scenario
from .scheduling import abs_schedule, bottleneck_oracle, random_schedule

__version__ = "0.1.0"

__all__ = [
    "AllInfeasible", "Allocation", "AllocationResult", "AnnealResult",
    "AuxVariables", "BeamAssignment", "ConfigError", "GainTable",
    "Infeasible", "InfeasibleMatrix", "NoProgress", "PolarLocation",
    "PrecoderSet", "RSSelection", "RankDeficient", "RateReport", "SCHEMES",
    "SPEED_OF_LIGHT", "Scenario", "SweepResult", "SystemConfig", "TooLarge",
    "TraceBundle", "TrialRecord", "Unassigned", "ValidationReport",
    "VerifyResult", "abs_schedule", "alternating_opt", "anneal",
    "aux_update", "bottleneck_oracle", "common_sinr", "config_from_dict",
    "convergence_trace", "convex_step", "device_channel", "device_sinr",
    "element_distances", "evaluate", "ff_response", "flip_probability",
    "format_summary_rows", "format_trace_rows", "format_trial_rows",
    "gain_tables", "load_config", "nf_response", "reference_config",
    "private_sinr", "random_schedule", "rayleigh_distance", "run_trial",
    "sample_scenario", "surrogate_eval", "sweep", "validate_suite",
    "verify_constraints", "zf_precoders",
]
