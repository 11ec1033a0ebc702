"""Exception hierarchy shared by all modules."""


class SeqGiniError(Exception):
    pass


class ParameterError(SeqGiniError, ValueError):
    """Argument outside its documented domain."""


class FrameError(SeqGiniError):
    """Sampling frame cannot support the requested design."""


class InsufficientReplicatesError(SeqGiniError):
    """A stratum has fewer than two cluster draws."""


class DegenerateSampleError(SeqGiniError):
    """Weighted mean income is not positive."""


class SourceError(SeqGiniError):
    """A cluster source ran out of clusters before the cap."""


class SurveyFormatError(SeqGiniError):
    """Malformed survey input file; message names file and row."""

    def __init__(self, path, row, message):
        self.path = str(path)
        self.row = row
        super().__init__(f"{self.path}: row {row}: {message}")
