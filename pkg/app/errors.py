"""
Exception hierarchy for the Ethics2Vec audit toolkit.

Every error carries a short remediation hint that the CLI prints next to
the message. Input problems (unparseable files, bad configuration) are
InputError subclasses and map to exit code 2; everything else is a domain
error and maps to exit code 1.
"""

from typing import Optional


class EthicsAuditError(Exception):
    """Base class for every error raised by the toolkit."""

    hint = "See the log output for details."

    def __init__(self, message: str, hint: Optional[str] = None):
        super().__init__(message)
        if hint is not None:
            self.hint = hint


class InputError(EthicsAuditError):
    """Malformed input file or configuration."""


class ParseError(InputError):
    """A data file could not be parsed."""

    hint = "Check the file header and the offending row."

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, column: Optional[str] = None):
        location = []
        if path is not None:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.path = path
        self.line = line
        self.column = column


class ConfigError(InputError):
    """A configuration file or override is invalid."""

    hint = "Run `print-config` to see every key with its default value."

    def __init__(self, message: str, key_path: Optional[str] = None):
        prefix = f"{key_path}: " if key_path else ""
        super().__init__(f"{prefix}{message}")
        self.key_path = key_path


# Decision log problems

class EmptyLog(EthicsAuditError, ValueError):
    hint = "The decision log contains no records."


class SingleClassLog(EthicsAuditError, ValueError):
    hint = ("The log needs records of both classes (truth=0 and truth=1); the message gives "
            "the minimum per class for this step.")


class NonFiniteThreshold(EthicsAuditError, ValueError):
    hint = "Thresholds must be finite real numbers."


class ZeroVariance(EthicsAuditError, ValueError):
    hint = ("All scores of one class are identical; the binormal model does not "
            "apply. Try --method nonparametric.")


# ROC slope problems

class TauOutOfRange(EthicsAuditError, ValueError):
    hint = "The threshold lies outside the range covered by the ROC curve."


class FlatFprWindow(EthicsAuditError, ValueError):
    hint = ("The false positive rate does not change around the operating "
            "threshold, so the operating region carries no information about "
            "the loss ratio.")


class InsufficientPoints(EthicsAuditError, ValueError):
    hint = "Widen the bandwidth or collect more records near the operating threshold."


# Binary agent problems

class NoInteriorOptimum(EthicsAuditError, ValueError):
    hint = ("The best policy is constant (always act or never act); there is no "
            "operating threshold to audit.")


class NonPositiveSlope(EthicsAuditError, ValueError):
    hint = "The ROC slope at the operating point must be strictly positive."


class InconsistentActions(EthicsAuditError, ValueError):
    hint = ("The agent's actions are not a threshold function of its scores; "
            "the threshold model cannot be used for this agent.")


# Continuous agent problems

class InvalidHorizon(EthicsAuditError, ValueError):
    hint = "The horizon T must be a positive multiple of dt."


class RangeViolation(EthicsAuditError, ValueError):
    hint = "The action and its finite-difference step must stay within [0, u_max]."


class EmptyTrace(EthicsAuditError, ValueError):
    hint = "The trace has no steps to aggregate."


class NotTwoRisks(EthicsAuditError, ValueError):
    hint = "Weight ratios are solved for exactly two risks; use the emitted constraint for more."


class DegenerateDenominator(EthicsAuditError, ValueError):
    hint = "The accident-risk derivatives sum to (almost) zero; the weight ratio is undefined."


class DivisionByZeroSpeed(EthicsAuditError, ValueError):
    hint = "The vehicle is stalled before arriving; the lateness derivative is undefined."
