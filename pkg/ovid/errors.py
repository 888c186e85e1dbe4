"""
Exception hierarchy for the OVID toolkit

UsageError maps to exit code 1 and DataError to exit code 2 in the CLI.
"""


class OvidError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 2


class UsageError(OvidError):
    """Invalid flags, config keys or argument combinations"""

    exit_code = 1

    def __init__(self, message: str, parser=None):
        super().__init__(message)
        self.parser = parser


class DataError(OvidError):
    """Input data violates a contract"""

    exit_code = 2


class MalformedXml(DataError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"Malformed XML{where}: {message}")


class UnknownChangeset(DataError):
    def __init__(self, changeset_id: int):
        self.changeset_id = changeset_id
        super().__init__(f"Edit references unknown changeset {changeset_id}")


class EditOutsideWindow(DataError):
    def __init__(self, changeset_id: int, t: int, window: tuple):
        self.changeset_id = changeset_id
        self.t = t
        self.window = window
        super().__init__(
            f"Edit at {t} lies outside changeset {changeset_id} window [{window[0]}, {window[1]}]"
        )


class StoreIoError(DataError):
    def __init__(self, message: str, record: int | None = None, offset: int | None = None):
        self.record = record
        self.offset = offset
        where = f" at record {record} (byte offset {offset})" if record is not None else ""
        super().__init__(f"{message}{where}")


class SchemaVersionMismatch(DataError):
    pass


class InsufficientPopulation(DataError):
    pass


class MissingPreviousVersion(DataError):
    def __init__(self, object_key: tuple, version: int):
        self.object_key = object_key
        self.version = version
        super().__init__(
            f"No version below {version} indexed for {object_key[1]} {object_key[0]}"
        )


class EmptyTrainingSet(DataError):
    pass


class EmptySplit(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class DimMismatch(DataError):
    pass


class EmptyKeySet(DataError):
    pass


class InvalidRate(DataError):
    pass


class ConfigViolation(DataError):
    pass


class FormatVersionMismatch(DataError):
    pass


class ChecksumMismatch(DataError):
    pass


class ReferencePredictionMismatch(DataError):
    pass


class EmptyEvaluation(DataError):
    pass


class TrainingDiverged(DataError):
    pass
