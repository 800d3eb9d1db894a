"""Exception hierarchy shared by all modules."""


class SymbreakError(Exception):
    """Base class for every error raised by this package."""


class InvalidGrid(SymbreakError, ValueError):
    pass


class InvalidField(SymbreakError, ValueError):
    pass


class InvalidAxis(SymbreakError, ValueError):
    pass


class FormatError(SymbreakError, ValueError):
    """Malformed snapshot file. ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class InvalidState(SymbreakError, ValueError):
    pass


class CFLError(SymbreakError, ValueError):
    def __init__(self, dt: float, max_dt: float):
        super().__init__(f"dt={dt:g} violates CFL; max admissible dt is {max_dt:.6g}")
        self.dt = dt
        self.max_dt = max_dt


class InvalidMatrix(SymbreakError, ValueError):
    pass


class DimError(SymbreakError, ValueError):
    pass


class InvalidTensorField(SymbreakError, ValueError):
    def __init__(self, message: str, location=None):
        if location is not None:
            message = f"{message} at grid index {tuple(int(i) for i in location)}"
        super().__init__(message)
        self.location = location


class InvalidTime(SymbreakError, ValueError):
    pass


class AliasError(SymbreakError, ValueError):
    pass


class InputError(SymbreakError, ValueError):
    pass


class WriteError(SymbreakError, OSError):
    pass
