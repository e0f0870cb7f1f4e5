"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Configuration file or parameter set is invalid."""


class RankDeficient(RuntimeError):
    """User channel matrix is too ill-conditioned for zero-forcing."""


class InfeasibleMatrix(RuntimeError):
    """No injective device-to-beam matching exists for the gain matrix."""


class TooLarge(ValueError):
    """Problem size exceeds what the exhaustive oracle is willing to enumerate."""


class Unassigned(KeyError):
    """Device has no beam in the given assignment."""


class Infeasible(RuntimeError):
    """Power allocation cannot meet the rate floors within the budget."""


class NoProgress(RuntimeError):
    """Alternating optimizer objective decreased; indicates an inner-solver bug."""


class AllInfeasible(RuntimeError):
    """Every rate-splitting selection visited by the annealer was infeasible."""
