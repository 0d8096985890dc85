"""Exception hierarchy.

Every error raised by the package derives from :class:`ScdlError`. The three
intermediate classes map onto CLI exit codes (2 config, 3 data, 4 numerical).
"""


class ScdlError(Exception):
    exit_code = 1


class ConfigError(ScdlError, ValueError):
    exit_code = 2


class DataError(ScdlError, ValueError):
    exit_code = 3


class NumericalError(ScdlError, ArithmeticError):
    exit_code = 4


# -- hsi-data -------------------------------------------------------------

class MissingFile(DataError, FileNotFoundError):
    pass


class HeaderParse(DataError):
    pass


class SizeMismatch(DataError):
    pass


class NonFiniteValue(DataError):
    def __init__(self, index, msg=None):
        self.index = int(index)
        super().__init__(msg or f"non-finite value at flat index {self.index}")


class _LineError(DataError):
    def __init__(self, line, msg):
        self.line = int(line)
        super().__init__(f"line {self.line}: {msg}")


class ParseError(_LineError):
    pass


class OutOfBounds(_LineError):
    pass


class DuplicateCoordinate(_LineError):
    pass


class IndexOutOfRange(DataError):
    pass


class ClassTooSmall(DataError):
    def __init__(self, class_id, msg=None):
        self.class_id = int(class_id)
        super().__init__(msg or f"class {self.class_id} has too few samples")


class EmptyTestSet(DataError):
    pass


# -- argument / shape errors ---------------------------------------------

class DimensionMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class InvalidArgument(DataError):
    pass


class InvalidPatchWidth(InvalidArgument):
    pass


class EvenWindow(InvalidArgument):
    pass


class EmptyCenters(InvalidArgument):
    pass


class InvalidBinCount(InvalidArgument):
    pass


class RangeOutOfBounds(InvalidArgument):
    pass


class NotEnoughSamples(DataError):
    pass


class AllZeroSamples(DataError):
    pass


class SingleClass(DataError):
    def __init__(self, msg, pair=None):
        self.pair = pair
        super().__init__(msg)


# -- solver errors --------------------------------------------------------

class ZeroInitRow(NumericalError, ValueError):
    pass


class ZeroAtom(NumericalError, ValueError):
    pass
