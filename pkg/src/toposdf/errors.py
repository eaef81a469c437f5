"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class DegenerateInputError(ValueError):
    """Input is degenerate (zero extent, empty batch, vanishing direction)."""


class ConsistencyError(ValueError):
    """Two objects that must describe the same structure disagree."""


class EmptyMeshError(RuntimeError):
    """Isosurface extraction found no sign change."""

    def __init__(self, min_value, max_value, iso):
        self.min_value = float(min_value)
        self.max_value = float(max_value)
        self.iso = float(iso)
        super().__init__(
            f"no level crossing at iso={iso}: field range "
            f"[{min_value}, {max_value}]"
        )


class TrainingDiverged(RuntimeError):
    """Training loop hit a non-finite loss."""


class UnsupportedFormatError(ValueError):
    """A file is recognizable but in a variant this package does not read."""


class ParseError(ValueError):
    """A text input failed to parse; carries file context when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        if prefix:
            message = f"{prefix}: {message}"
        super().__init__(message)
