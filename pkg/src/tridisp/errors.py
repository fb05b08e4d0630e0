"""Exception types shared across the toolkit."""


class FormatError(ValueError):
    """A file exists but its contents violate the expected format."""


class DegenerateInputError(ValueError):
    """An input is structurally valid but leaves nothing to compute on."""


class NumericalError(RuntimeError):
    """An optimization or loss evaluation produced non-finite values."""
