"""Exception hierarchy shared by every module of the package."""


class NomFtnError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(NomFtnError, ValueError):
    """Invalid parameter, unsupported order or inconsistent plan."""


class FramingError(NomFtnError, ValueError):
    """Array length does not match the frame or band layout."""


class IntegrityError(NomFtnError, RuntimeError):
    """A numerical invariant was violated (e.g. non-Hermitian spectrum)."""


class DegenerateChannelError(NomFtnError, ArithmeticError):
    """Estimated channel gain too small to equalize."""

    def __init__(self, bin_index, gain):
        self.bin_index = bin_index
        self.gain = gain
        super().__init__(f"degenerate channel at occupied bin {bin_index}: |h| = {abs(gain):.3e}")


class AllocationError(NomFtnError, ValueError):
    """Bit-loading target cannot be met under the per-bin caps."""


class CsvParseError(NomFtnError, ValueError):
    """Malformed CSV handed to the plotting layer."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")
