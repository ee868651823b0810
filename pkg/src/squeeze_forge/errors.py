"""Exception types shared across the package."""


class DomainError(ValueError):
    """A graph was evaluated outside its chart."""


class DegenerateVectorError(ValueError):
    """A zero direction was passed where a tangent direction is required."""


class SearchExhausted(RuntimeError):
    """No admissible gluing radius was found within the halving budget."""

    def __init__(self, k, m, halvings, message=None):
        self.k = k
        self.m = m
        self.halvings = halvings
        super().__init__(
            message or f"no admissible epsilon for k={k}, m={m} after {halvings} halvings"
        )


class NotFound(RuntimeError):
    """find_m scanned every (m, N) up to the caps without success."""


class HypothesisViolated(ValueError):
    """The hypotheses of the squeezing lower bound do not hold."""


class InvariantViolation(ValueError):
    """A data type was constructed with values breaking its invariants."""


class CertificateRefused(RuntimeError):
    """A prerequisite check reported violations, so no certificate is issued."""

    def __init__(self, failing, message=None):
        self.failing = list(failing)
        super().__init__(message or "certificate refused; failing checks: " + ", ".join(self.failing))
