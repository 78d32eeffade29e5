"""Optimal control of photonic networks built from coupled nonlinear cavities.

The package simulates networks of single-mode cavities that share a
programmable linear mixing circuit, each cavity carrying either a Kerr
(self-phase-modulation) nonlinearity or a resonant two-level emitter, and
optimizes piecewise-constant control schedules that realize multiphoton
logic on dual-rail and higher-excitation encodings.

Set CAVNET_THREADS before the first import to cap the BLAS thread pools
(useful for reproducible timings); explicit OMP/BLAS variables still win.
"""

import os as _os

_threads = _os.environ.get("CAVNET_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)
del _os, _threads

from .controls import (
    Bounds,
    ControlParams,
    ControlSchedule,
    GroupInit,
    InitSpec,
    TrainFlags,
    coupling_matrix,
    initialize,
    materialize,
)
from .hilbert import (
    BasisState,
    CavityLayout,
    HilbertSpace,
    Operator,
    SectorError,
    StateVector,
    build_space,
    ket,
)
from .mixing import MixingError, coupling_from_scattering, scattering_from_coupling
from .model import ControlBin, NonlinearKind, build_hamiltonian
from .objective import (
    CostBreakdown,
    PenaltyWeights,
    TaskBatch,
    cost,
    cost_and_gradient,
    effective_bandwidth,
    infidelity,
    make_batch,
    smoothness_penalty,
)
from .propagate import Propagator, evolve, expm_step

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
