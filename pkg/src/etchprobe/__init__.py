"""Electro-thermal simulation and transient analysis for detecting
incomplete sacrificial-layer release in two-beam MEMS resonators."""

from .analysis import (TimeConstantSpectrum, deconvolve_spectrum, estimate_shift,
                       resample_log, smooth_derivative)
from .calibration import CalibrationRecord, CalibrationResult, fit_sensitivity, voltage_to_temperature
from .classifier import ClassifierConfig, EtchReport, compare
from .config import RunConfig, load_config
from .curves import TransientCurve, read_curve, write_curve
from .geometry import ResonatorParams, build_resonator, quarter_model, set_etch_state
from .instrument import MeasurementSetup, run_virtual_experiment
from .materials import MaterialTable
from .mesh import ThermalNetwork, discretize
from .solver import TransientGrid, steady_state, transient_switch_off

__version__ = "0.1.0"
