from .config import ConfigError, RunConfig, build_topology, load, parse, render
from .runner import RunResult, SweepError, gain_table, run, simulate, sweep, sweep_table
from .topology import (DistanceDecay, Lossless, from_positions, gen_grid, grid_for, lossy21,
                       quality_model, two_arm_line)
