"""
Exceptions raised by the package. The command line maps them to exit codes:

    - ``ConfigError`` -> 1
    - ``DataFormatError`` and ``DimensionError`` -> 2
    - ``NumericError`` -> 3
"""


class SpenError(Exception):
    """Base class of every error raised by spenml."""


class DimensionError(SpenError, ValueError):
    '''
    Raised when two operands have incompatible shapes.

    Args:
        - **message** (*str*): What was being combined.
        - **shapes** (*tuple*): The offending shapes, reported in the message.
    '''

    def __init__(self, message, *shapes):
        self.shapes = shapes
        if shapes:
            message = "%s (shapes: %s)" % (message, ", ".join(str(s) for s in shapes))
        super().__init__(message)


class DataFormatError(SpenError, ValueError):
    '''
    Raised when a data file cannot be parsed or violates the dataset invariants.

    Args:
        - **message** (*str*): Description of the problem.
        - **path** (*str*): The file being read (optional).
        - **line_number** (*int*): 1-based line number of the offending line (optional).
    '''

    def __init__(self, message, path=None, line_number=None):
        self.path = path
        self.line_number = line_number
        where = ""
        if path is not None:
            where = str(path)
            if line_number is not None:
                where += ":%d" % line_number
            where += ": "
        super().__init__(where + message)


class NumericError(SpenError, ArithmeticError):
    '''
    Raised on non-finite gradients, objectives or losses.

    Args:
        - **message** (*str*): Description of the problem.
        - **stage** (*str*): Training stage in which it happened (optional).
        - **epoch** (*int*): Epoch in which it happened (optional).
        - **coordinate** (*int*): Offending label coordinate (optional).
    '''

    def __init__(self, message, stage=None, epoch=None, coordinate=None):
        self.detail = message
        self.stage = stage
        self.epoch = epoch
        self.coordinate = coordinate
        context = []
        if stage is not None:
            context.append("stage=%s" % stage)
        if epoch is not None:
            context.append("epoch=%d" % epoch)
        if coordinate is not None:
            context.append("coordinate=%d" % coordinate)
        if context:
            message = "%s [%s]" % (message, ", ".join(context))
        super().__init__(message)

    def at(self, stage, epoch):
        """The same failure located in a training stage and epoch."""
        return NumericError(self.detail, stage, epoch, self.coordinate)


class ConfigError(SpenError, ValueError):
    """Raised for unknown, missing or ill-typed configuration fields."""

    def __init__(self, field, message):
        self.field = field
        super().__init__("%s: %s" % (field, message))
