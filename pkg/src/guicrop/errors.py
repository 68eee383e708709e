"""Exception types raised across the toolkit."""


class GuiCropError(Exception):
    """Base class for all toolkit errors."""


class OutOfBounds(GuiCropError, ValueError):
    pass


class InvalidTarget(GuiCropError, ValueError):
    pass


class InvalidSigma(GuiCropError, ValueError):
    pass


class TooSmall(GuiCropError, ValueError):
    pass


class BadThresholds(GuiCropError, ValueError):
    pass


class DegenerateBox(GuiCropError, ValueError):
    pass


class PlacementFailure(GuiCropError, RuntimeError):
    pass


class UnknownDescription(GuiCropError, LookupError):
    pass


class AgentFailure(GuiCropError, RuntimeError):
    """An agent call raised or returned an unusable answer."""


class ProtocolError(AgentFailure):
    """An out-of-process agent violated the JSON-lines wire protocol."""


class AugmenterFailure(GuiCropError, RuntimeError):
    pass


class ConfigError(GuiCropError, ValueError):
    pass
