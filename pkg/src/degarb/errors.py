class CellFault(RuntimeError):
    """A cell model left its valid operating region."""

    def __init__(self, message, step=None, timestamp=None):
        super().__init__(message)
        self.step = step
        self.timestamp = timestamp


class SaturationFault(CellFault):
    """Electrode concentration left [0, c_max] (over- or under-charge)."""


class KineticsStallFault(CellFault):
    """Surface concentration at a bound, so the exchange density vanished."""


class ThermalFault(CellFault):
    """Cell temperature left the guarded window."""


class VoltageFault(CellFault):
    """Terminal voltage left the hard bounds."""


class PowerFault(CellFault):
    """The commanded power cannot be delivered at any current."""


class SocLimitError(ValueError):
    """A linear-model step would leave the allowed SoC window."""


class DataError(ValueError):
    """Malformed input data (price files, ledgers, configuration)."""
