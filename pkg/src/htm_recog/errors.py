"""Exception hierarchy shared by every pipeline stage."""


class HtmError(Exception):
    """Base class for all errors raised by :mod:`htm_recog`."""


class DimensionError(HtmError, ValueError):
    """Raised when raster or grid dimensions are incompatible."""


class ParseError(HtmError):
    """Raised when an input file cannot be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ValidationError(ParseError):
    """Raised when a parsed file violates a domain constraint."""


class ConfigError(HtmError):
    """Raised for invalid experiment configuration values."""


class EmptyClassError(HtmError):
    """Raised when a class map is trained from zero images."""


class EmptyModelError(HtmError):
    """Raised when classification is attempted with no class maps."""


class InsufficientImagesError(HtmError):
    """Raised when a split asks for more images than a class provides."""

    def __init__(self, class_id, session, wanted, available):
        self.class_id = class_id
        self.session = session
        self.wanted = wanted
        self.available = available
        super().__init__(
            f"class {class_id} has {available} image(s) in session {session}, "
            f"but {wanted} were requested"
        )
