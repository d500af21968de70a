"""Balanced-truncation model order reduction for RLCk interconnect models."""
from .analysis import (
    FrequencySweep,
    SParameterSet,
    compare,
    dc_solve,
    sp_sweep,
    transfer_function,
    transient,
)
from .bt import ReductionConfig, Rom, reduce
from .lyapunov import EksOptions, solve_dense, solve_eks
from .mna import StateSpaceModel, assemble_mna, load_matrices, to_state_space
from .netlist import parse_netlist, read_netlist

__version__ = "0.1.0"
