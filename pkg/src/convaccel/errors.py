"""Exception hierarchy.  ``exit_code`` is the CLI's category code."""


class ConvAccelError(Exception):
    exit_code = 1


class ConfigError(ConvAccelError):
    """Unparseable or invalid run configuration."""
    exit_code = 2

    def __init__(self, message, field=None, line=None, column=None):
        self.field = field
        self.line = line
        self.column = column
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}, column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class MissingFileError(ConvAccelError):
    exit_code = 3


class GeometryError(ConvAccelError, ValueError):
    """Kernel does not fit the input, or a non-positive stride/size."""
    exit_code = 4


class ShapeError(ConvAccelError, ValueError):
    """Operands with mismatched shapes."""
    exit_code = 4


class ShapeChainError(ShapeError):
    """A layer in a network does not accept its predecessor's output."""

    def __init__(self, layer_index, layer_name, message):
        self.layer_index = layer_index
        self.layer_name = layer_name
        super().__init__(f"layer {layer_index} ({layer_name}): {message}")


class EmptyReductionError(ConvAccelError, ValueError):
    exit_code = 4


class StreamExhaustedError(ConvAccelError, RuntimeError):
    exit_code = 4


class TensorFormatError(ConvAccelError):
    exit_code = 5
    code = "format"


class MalformedHeaderError(TensorFormatError):
    code = "header"


class TruncatedPayloadError(TensorFormatError):
    code = "truncated"


class DimensionError(TensorFormatError):
    code = "dimension"


class ZeroCycleError(ConvAccelError, ValueError):
    exit_code = 4
