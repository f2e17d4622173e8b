"""Exception hierarchy shared by the library and the CLI."""


class SubgroupCRTError(Exception):
    """Base class; ``code`` is the machine-readable name used in CLI output."""

    code = "Error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class InvalidDesign(SubgroupCRTError, ValueError):
    code = "InvalidDesign"


class InvalidIcc(SubgroupCRTError, ValueError):
    code = "InvalidIcc"


class InvalidComponents(SubgroupCRTError, ValueError):
    code = "InvalidComponents"


class LevelMismatch(SubgroupCRTError, ValueError):
    code = "LevelMismatch"


class UnbalancedData(SubgroupCRTError, ValueError):
    code = "UnbalancedData"

    def __init__(self, message: str, cell: dict | None = None):
        super().__init__(message)
        self.cell = cell

    def to_dict(self) -> dict:
        out = super().to_dict()
        if self.cell is not None:
            out["cell"] = self.cell
        return out


class ParseError(SubgroupCRTError, ValueError):
    code = "ParseError"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line

    def to_dict(self) -> dict:
        out = super().to_dict()
        if self.line is not None:
            out["line"] = self.line
        return out


class DegenerateVariance(SubgroupCRTError, ArithmeticError):
    code = "DegenerateVariance"


class DomainError(SubgroupCRTError, ValueError):
    code = "DomainError"


class Infeasible(SubgroupCRTError, ValueError):
    """No finite sample size reaches the requested power."""

    code = "Infeasible"

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class TooLarge(SubgroupCRTError, ValueError):
    code = "TooLarge"


class SingularComponents(SubgroupCRTError, ArithmeticError):
    code = "SingularComponents"


class SingularSystem(SubgroupCRTError, ArithmeticError):
    code = "SingularSystem"


class SingularCovariance(SubgroupCRTError, ArithmeticError):
    code = "SingularCovariance"


class NoConvergence(SubgroupCRTError, RuntimeError):
    code = "NoConvergence"
