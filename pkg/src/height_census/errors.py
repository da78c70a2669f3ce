"""Exception hierarchy. All library errors derive from :class:`HeightCensusError`."""


class HeightCensusError(Exception):
    pass


class InputError(HeightCensusError, ValueError):
    """Malformed user input (rationals, config values)."""


class ZeroArgument(InputError):
    pass


class InvalidTuple(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class NotInGroup(HeightCensusError):
    pass


class RankZero(InputError):
    pass


class DegenerateCoefficient(InputError):
    pass


class ZeroFunctional(InputError):
    pass


class UnvalidatedFamily(InputError):
    pass


class HeightOne(InputError):
    pass


class InsufficientData(InputError):
    pass


class PrecisionExhausted(HeightCensusError, ArithmeticError):
    pass


class NumericallyDegenerate(HeightCensusError, ArithmeticError):
    pass


class TailUnstable(HeightCensusError):
    pass
