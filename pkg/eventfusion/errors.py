"""Exception hierarchy for eventfusion.

Every error raised on purpose by the library derives from EventFusionError.
Value-type errors also subclass the matching builtin so generic callers can
catch them without importing this module.
"""


class EventFusionError(Exception):
    """Base class for all eventfusion errors."""


# --- Probability model ---

class InvalidDistribution(EventFusionError, ValueError):
    """A vector or table is not a valid probability distribution."""


class NegativeMass(InvalidDistribution):
    """A probability entry is negative."""


class MassExceedsUnity(InvalidDistribution):
    """Declared event probabilities sum to more than one."""

    def __init__(self, total):
        self.total = float(total)
        super().__init__(f"event probabilities sum to {self.total!r} > 1")


class AxisOutOfRange(EventFusionError, IndexError):
    pass


class AxisMismatch(EventFusionError, ValueError):
    """Two tables (or a table and a report list) disagree on their axes."""


# --- Coupling ---

class RhoOutOfRange(EventFusionError, ValueError):
    def __init__(self, rho):
        self.rho = rho
        super().__init__(f"rho must lie in [0, 1], got {rho!r}")


class InsufficientMarginals(EventFusionError, ValueError):
    pass


class CouplingError(EventFusionError, RuntimeError):
    """The greedy construction could not exhaust the marginals consistently."""


class SampleError(EventFusionError, ValueError):
    """Sample vectors are too short or of mismatched lengths."""


# --- Fusion ---

class UnresolvedAtom(EventFusionError, LookupError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"atom {label!r} is not bound to an axis of the joint")


class EventNotFound(EventFusionError, LookupError):
    def __init__(self, label, feature_id=None):
        self.label = label
        self.feature_id = feature_id
        where = f" in feature {feature_id!r}" if feature_id else ""
        super().__init__(f"event {label!r} not found{where}")


class LabelMismatch(EventFusionError, ValueError):
    pass


class ZeroWeights(EventFusionError, ValueError):
    pass


class CapacityError(EventFusionError, MemoryError):
    def __init__(self, cells, limit):
        self.cells = cells
        self.limit = limit
        super().__init__(f"joint table would have {cells} cells (limit {limit})")


# --- Definition language ---

class ParseError(EventFusionError):
    """Definition-file error with a 1-based source position.

    kind is one of 'lex', 'syntax', 'resolution', 'duplicate'.
    """

    LEX = 'lex'
    SYNTAX = 'syntax'
    RESOLUTION = 'resolution'
    DUPLICATE = 'duplicate'

    def __init__(self, line, column, kind, message):
        self.line = line
        self.column = column
        self.kind = kind
        self.message = message
        super().__init__(f"{line}:{column}: {kind} error: {message}")


# --- Calibration ---

class SingleClassLabels(EventFusionError, ValueError):
    pass


class NonFiniteScores(EventFusionError, ValueError):
    pass


# --- Baselines ---

class TotalConflict(EventFusionError, ArithmeticError):
    def __init__(self, conflict):
        self.conflict = float(conflict)
        super().__init__(f"mass functions are in total conflict (K={self.conflict!r})")


# --- Harness ---

class ScenarioError(EventFusionError, ValueError):
    pass


class DataError(EventFusionError, ValueError):
    """An input file is malformed or inconsistent with the definitions."""


# --- Warnings ---

class DegenerateInputWarning(UserWarning):
    """A statistic was requested on a sample without variance."""


class RangeOverlapWarning(UserWarning):
    """Two events declared on one feature have intersecting ranges."""
