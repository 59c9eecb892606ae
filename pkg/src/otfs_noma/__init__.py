"""2-user downlink power-domain OTFS-NOMA link-level simulator."""

__version__ = "0.1.0"

from .detection import (PowerAllocation, ReliabilityZone, ThresholdSchedule,
                        detect_iterative, ftpa_allocate, mmse_sic_detect)
from .lsqr import LsqrConfig, LsqrResult, lsqr_solve
from .modem import (CpConfig, DelayDopplerFrame, QamConstellation,
                    build_constellation)
from .simulation import SimConfig, SweepResult, run_trial, sweep

__all__ = [
    "__version__",
    "CpConfig",
    "DelayDopplerFrame",
    "LsqrConfig",
    "LsqrResult",
    "PowerAllocation",
    "QamConstellation",
    "ReliabilityZone",
    "SimConfig",
    "SweepResult",
    "ThresholdSchedule",
    "build_constellation",
    "detect_iterative",
    "ftpa_allocate",
    "lsqr_solve",
    "mmse_sic_detect",
    "run_trial",
    "sweep",
]
