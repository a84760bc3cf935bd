"""Exception types shared across the package."""


class DataError(Exception):
    """Input data is missing, malformed, or mutually inconsistent."""


class ParseError(DataError):
    """A text input file has a malformed line."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class NumericalError(Exception):
    """A computation produced non-finite or otherwise unusable values."""


class PipelineError(Exception):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
