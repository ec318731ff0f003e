"""
Error classes shared by the simulator.
Each class carries the process exit code the CLI reports for it.
"""

from typing import Any, List, Optional


class BridgeSimError(Exception):
    """Base class for every error the simulator raises on purpose."""
    exit_code = 1


class ParameterError(BridgeSimError, ValueError):
    """Invalid input: configuration, parameters or array shapes."""
    exit_code = 2


class ConfigSyntaxError(ParameterError):
    """A configuration line that cannot be parsed."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class NumericalError(BridgeSimError, ArithmeticError):
    """A numerical kernel failed to reach its contract."""
    exit_code = 3


class DivergenceError(NumericalError):
    """Non-finite values while integrating an initial-value problem."""

    def __init__(self, message: str, abscissa: float):
        super().__init__(f"{message} (at x={abscissa:.6g})")
        self.abscissa = abscissa


class HorizonTooLargeError(NumericalError):
    """Picard iteration stopped contracting."""

    def __init__(self, horizon: float, ratios: List[float]):
        suggested = horizon / 2.0
        super().__init__(
            f"Picard map is not contracting on horizon {horizon:g} "
            f"(ratios {', '.join(f'{r:.3g}' for r in ratios[-3:])}); "
            f"try picard.horizon = {suggested:g}"
        )
        self.horizon = horizon
        self.ratios = list(ratios)
        self.suggested_horizon = suggested


class BlowUpError(BridgeSimError):
    """Time stepping produced non-finite state values."""
    exit_code = 4

    def __init__(self, time: float, partial: Optional[Any] = None):
        super().__init__(f"non-finite state at t={time:.6g}")
        self.time = time
        self.partial = partial
