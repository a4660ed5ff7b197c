"""Exception types raised across the lab."""


class SlowmixError(Exception):
    """Base class for all lab errors."""


class DegenerateProfile(SlowmixError):
    pass


class InvalidKappa(SlowmixError):
    pass


class HorizonExceeded(SlowmixError):
    pass


class QuadratureTooCoarse(SlowmixError):
    pass


class NotMeanZero(SlowmixError):
    pass


class InsufficientData(SlowmixError):
    pass


class NoDecayWithinHorizon(SlowmixError):
    pass


class NoRoot(SlowmixError):
    pass


class OnDiagonal(SlowmixError):
    pass


class ConfigInvalid(SlowmixError):
    """Carries a mapping of field name to message."""

    def __init__(self, errors):
        self.errors = dict(errors)
        msg = "; ".join(f"{k}: {v}" for k, v in self.errors.items())
        super().__init__(msg)


class UnknownKind(SlowmixError):
    pass
