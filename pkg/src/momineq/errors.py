"""Exception types shared across the package.

Every error raised on a user-facing precondition has its own class so
callers (and the CLI exit-code mapping) can match on type rather than
message text.
"""

from __future__ import annotations


class MomineqError(Exception):
    """Base class for all package errors."""


# --- data loading ---------------------------------------------------------

class DataError(MomineqError):
    """A problem with an input data file."""


class MissingColumn(DataError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"required column {column!r} not found in header")


class NonNumericCell(DataError):
    """A cell that does not parse to a finite float.

    ``row`` is the 1-based data row (the header does not count),
    ``column`` the column name.
    """

    def __init__(self, row: int, column: str, value: str = ""):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(
            f"cell at data row {row}, column {column!r} is not a finite "
            f"number: {value!r}"
        )


class TooFewRows(DataError):
    def __init__(self, n: int, minimum: int = 2):
        self.n = n
        super().__init__(f"need at least {minimum} data rows, got {n}")


# --- model construction and evaluation ------------------------------------

class EmptyModel(MomineqError):
    """Model with zero moment functions."""


class NegativeInstrumentValue(MomineqError):
    """An instrument function returned a negative value while inequality
    moments are present (a negative weight would flip the inequality)."""


class ThetaOutOfBox(MomineqError):
    def __init__(self, theta, box):
        self.theta = theta
        super().__init__(f"theta {theta} lies outside the parameter box {box}")


# --- optimization ----------------------------------------------------------

class InfeasibleRestriction(MomineqError):
    """The null restriction has no feasible point inside the box."""


class NoFiniteValue(MomineqError):
    """Every evaluated point of the profiled objective was +inf."""


# --- critical values and tuning -------------------------------------------

class KappaTooSmall(MomineqError):
    def __init__(self, kappa):
        self.kappa = kappa
        super().__init__(f"kappa must be >= 1, got {kappa}")


class GammaOutOfRange(MomineqError):
    def __init__(self, gamma, hint=""):
        self.gamma = gamma
        super().__init__(f"gamma = {gamma} out of admissible range{hint}")


class QuantileExceedsRoot(MomineqError):
    """The normal quantile squared reaches the sample size, so the
    self-normalized critical value is undefined."""


class EmptyGrid(MomineqError):
    """An evaluation grid with no points."""


# --- CLI configuration ------------------------------------------------------

class ConfigError(MomineqError):
    """Invalid run configuration."""


class UnknownKey(ConfigError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"unknown configuration key: {key}")


class TypeMismatch(ConfigError):
    def __init__(self, key: str, expected: str, got: str):
        self.key = key
        super().__init__(f"{key}: expected {expected}, got {got!r}")


class MissingRequired(ConfigError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"missing required configuration key: {key}")
