"""Exception types raised by the simulator."""


class ModelError(Exception):
    """Base class for failures that originate in the physical model or its numerics."""


class NonlinearitySingularity(ModelError, ValueError):
    pass


class ComplexSpectrum(ModelError, ValueError):
    pass


class EigensolverNonConvergence(ModelError, RuntimeError):
    pass


class StepUnderflow(ModelError, RuntimeError):
    pass


class VacuumField(ModelError, ValueError):
    pass
