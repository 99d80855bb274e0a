"""Transient simulation and characterization of hybrid memristor-CMOS logic."""

__version__ = "0.1.0"

from .devices import (FIG3_TEAM, NMOS_180, PMOS_180, LinearDriftParams, MosfetParams, Polarity,
                      TeamParams, fit_team_from_lid, team_dxdt, team_resistance, team_window)
from .measure import (GateReport, LogicThresholds, characterize, fall_time, loop_area, prop_delay,
                      read_logic, rise_time, truth_table)
from .netlist import Circuit, parse_netlist, serialize, validate
from .solver import SimResult, SolverConfig, SolverDivergence, Waveform, dc_operating_point, transient
from .stdcells import CellKind, CellParams, DeviceCount, area_ratio, build_cell, count_devices
