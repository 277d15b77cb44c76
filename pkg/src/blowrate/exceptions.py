"""
Error hierarchy. Everything raised on purpose derives from BlowrateError
"""


class BlowrateError(Exception):
    pass


class ParamError(BlowrateError, ValueError):
    """
    A parameter outside the range the problem is posed for
    """


class ConfigError(ParamError):
    """
    Config text that cannot be parsed, or has unknown keys
    """


class GridError(BlowrateError, ValueError):
    pass


class IntegrationFault(BlowrateError):
    """
    Negativity beyond round-off: a scheme / CFL bug, not a property
    of the solution
    """


class AnalysisError(BlowrateError, ValueError):
    pass


class InsufficientData(AnalysisError):
    pass


class EstimateDisagreement(AnalysisError):
    pass


class FrameError(AnalysisError):
    pass
