class OracleBoundExceeded(ValueError):
    """Raised when brute-force enumeration is asked for a group above the oracle bound."""

    def __init__(self, size: int, bound: int, what: str = "group elements"):
        super().__init__(
            f"Brute force over {size} {what} exceeds the oracle bound {bound}. "
            "Raise SANDPILE_ORACLE_BOUND or use the counting route."
        )
        self.size = size
        self.bound = bound


class InconsistentFormulaError(RuntimeError):
    """The two closed forms of a limiting probability disagree beyond tolerance."""


class IllConditionedStepError(ArithmeticError):
    """A pivot of the triangular moment solve is too small to divide by."""

    def __init__(self, index, pivot):
        super().__init__(f"Pivot {pivot} at index {index} is below the conditioning threshold.")
        self.index = index
        self.pivot = pivot


class MissingPrimeError(ValueError):
    """The prime set passed to a multi-prime probability misses a prime of |G|."""


class BalanceCertificateError(ArithmeticError):
    """An entry distribution puts too much mass on a single residue class."""
