"""Exception hierarchy shared by all entecho modules."""


class EntechoError(Exception):
    """Base class for every error raised by entecho."""


class NumericalError(EntechoError):
    """A computation hit a numerically ill-defined point."""


class GapClosed(NumericalError):
    """The Bloch gap |d| vanishes, so eigenvectors are undefined."""


class GaugeSingular(NumericalError):
    """A gauge denominator vanishes away from a removable point."""


class DegenerateFermiLevel(NumericalError):
    """A single-particle level sits at the chemical potential at T=0."""


class NotHermitian(NumericalError):
    pass


class EigenvalueOutOfRange(NumericalError):
    """Correlation-matrix eigenvalue outside [0, 1] beyond clamp tolerance."""


class DimensionMismatch(EntechoError, ValueError):
    pass


class BadProfile(EntechoError, ValueError):
    """Mass profile length does not match the lattice length."""


class WrongShape(EntechoError, ValueError):
    """A pathway was asked to handle a protocol it does not apply to."""


class SectorTooLarge(EntechoError, ValueError):
    """Fock sector exceeds what the exact oracle will enumerate."""


class Unclassifiable(NumericalError):
    pass


class ConfigInvalid(EntechoError, ValueError):
    """Configuration file failed validation.

    ``errors`` maps dotted field names to messages.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = {"config": errors}
        self.errors = dict(errors)
        lines = [f"{k}: {v}" for k, v in self.errors.items()]
        super().__init__("invalid configuration\n  " + "\n  ".join(lines))
