"""Exception types shared across the package."""


class WindowTooSmall(ValueError):
    """An initial field state does not fit inside its truncation window."""


class BasisMismatch(ValueError):
    """Two objects that must share a product basis do not."""


class DimensionTooLarge(ValueError):
    """The dense oracle was asked to handle a basis it cannot afford."""


class ValidationError(ValueError):
    """A configuration violates one or more invariants.

    ``problems`` lists every violated invariant, not only the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ParseError(ValueError):
    """A configuration file could not be read."""


class UnknownPreset(KeyError):
    pass
