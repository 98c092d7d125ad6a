"""
Error hierarchy for fraglab

Services raise these; the command line maps ``exit_code`` to the process status.
"""

from typing import Iterable, Optional, Sequence


class FraglabError(Exception):
    """Base class for all engine errors"""

    exit_code: int = 1


class ConfigError(FraglabError):
    """Invalid run document, flag or recipe"""

    exit_code = 2


class CapacityError(FraglabError):
    """A basis or matrix would exceed the configured limits"""

    exit_code = 3


class ConvergenceError(FraglabError):
    """The iterative propagator could not certify a time step"""

    exit_code = 4


class ConstraintViolation(FraglabError):
    """A configuration breaks the padding or blockade constraint"""


class NotFoundError(FraglabError):
    """A configuration is not a member of the basis"""


class AdmissibilityError(FraglabError):
    """A (N_q, N_0) split is not realizable for the chain length"""

    def __init__(self, n_atoms: int, n_q: int, n_0: int, reason: Optional[str] = None):
        self.n_atoms = n_atoms
        self.n_q = n_q
        self.n_0 = n_0
        detail = f": {reason}" if reason else ""
        super().__init__(f"Split (N_q={n_q}, N_0={n_0}) is not admissible for N_a={n_atoms}{detail}")


class MissingFragmentError(FraglabError):
    """A temporal ensemble lacks fragments of the requested sector"""

    def __init__(self, missing: Iterable[Sequence[int]]):
        self.missing = [tuple(p) for p in missing]
        labels = ", ".join("".join("c" if q == 1 else "n" for q in p) for p in self.missing)
        super().__init__(f"Ensemble is missing {len(self.missing)} fragment(s): {labels}")


class InsufficientPointsError(FraglabError):
    """Too few sizes for a scaling fit"""
