"""Exception hierarchy shared by every module in the package."""


class BitserialError(Exception):
    """Base class for all errors raised by ``bitserial``."""


class InputDomainError(BitserialError, ValueError):
    """A real-valued input is outside the quantizer's domain (NaN or inf)."""


class ShapeError(BitserialError, ValueError):
    pass


class ParamsError(BitserialError, ValueError):
    """Quantizer parameters are invalid or do not match the data they describe."""


class CorruptInputError(BitserialError, ValueError):
    """A level exceeds the range representable with the declared bit width."""


class IntegrityError(BitserialError, ValueError):
    """A packed matrix violates its layout invariants (e.g. nonzero pad bits)."""


class DegenerateInputError(BitserialError, ValueError):
    pass


class ConfigurationError(BitserialError, ValueError):
    pass


class OverflowRiskError(BitserialError, OverflowError):
    """The requested product could overflow a 32-bit accumulator."""


class UnsupportedShapeError(BitserialError, ValueError):
    pass
