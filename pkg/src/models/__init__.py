"""Models package for the Matrix Freedman toolkit."""

from .bounds import BoundResult, CgfBoundFn, TailQuery
from .martingale import Outcome, StepRecord, StoppingRecord, Trajectory, TransitionTable
from .matrices import EigenDecomposition, RectMatrix, SymMatrix
from .run_config import RunConfig
from .verification import CertificationReport, SuiteReport, SweepRow, TailEstimate

__all__ = [
    'BoundResult', 'CgfBoundFn', 'TailQuery',
    'Outcome', 'StepRecord', 'StoppingRecord', 'Trajectory', 'TransitionTable',
    'EigenDecomposition', 'RectMatrix', 'SymMatrix',
    'RunConfig',
    'CertificationReport', 'SuiteReport', 'SweepRow', 'TailEstimate',
]
