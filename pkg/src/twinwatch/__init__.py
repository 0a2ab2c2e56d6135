"""Kalman-filter state estimation and innovation-based monitoring for an incubator digital twin."""

from ._backend import BACKEND
from .anomaly import AnomalyEvent, DetectorConfig, detect, nis
from .estimators import backsolve_hidden_state, batch_map_oracle, propagate_mean_openloop
from .incubator import Fault, FaultSchedule, IncubatorParams, build_system, simulate_run, thermostat_inputs
from .kalman import FilterState, PredictedState, UpdateResult, gain, kf_step, predict, run_filter, update
from .matgauss import Gaussian, mvn_logpdf, mvn_sample, spd_factor
from .statespace import ContinuousLTI, LinearDiscreteSystem, Trajectory, discretize, measure, simulate, step, step_noisy
from .telemetry import TelemetryRecord, read_csv, replay, write_csv

__version__ = "0.1.0"
