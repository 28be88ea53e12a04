"""Exception hierarchy. The CLI maps each family to an exit code."""


class PhysMomError(Exception):
    exit_code = 4


class ConfigError(PhysMomError):
    exit_code = 2


class DataError(PhysMomError):
    exit_code = 3


class ComputeError(PhysMomError):
    exit_code = 4


class InsufficientHistoryError(ComputeError):
    pass


class UndefinedScoreError(ComputeError):
    """Score is mathematically undefined (zero volatility or zero total mass)."""


class EmptyRankingError(ComputeError):
    pass
