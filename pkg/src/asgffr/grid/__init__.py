"""Nine-bus RMS simulation with an ASG injection."""

from .dynamics import AsgAttachment, DisturbanceSpec, SimResult, bus_frequency_estimate, run
from .metrics import ResponseMetrics, compute_metrics, energy_kwh, find_nadir
from .network import GridModel, build_ieee9, load_grid_file, make_model
from .powerflow import OperatingPoint, solve_power_flow

__all__ = [
    "AsgAttachment", "DisturbanceSpec", "GridModel", "OperatingPoint", "ResponseMetrics",
    "SimResult", "build_ieee9", "bus_frequency_estimate", "compute_metrics", "energy_kwh",
    "find_nadir", "load_grid_file", "make_model", "run", "solve_power_flow",
]
