"""Error hierarchy. Every error carries the process exit code the CLI uses."""

EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_DATA = 3


class CurationError(Exception):
    exit_code = EXIT_DATA


class ConfigError(CurationError):
    exit_code = EXIT_CONFIG


class InputError(CurationError):
    exit_code = EXIT_IO


class DataError(CurationError):
    exit_code = EXIT_DATA


class InvalidParameter(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    def __init__(self, path, diagnostics):
        self.path = path
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics)
        super().__init__(f"{path}: {len(self.diagnostics)} problem(s): {lines}")


# normalize
class EmptyAfterClean(DataError):
    def __init__(self, message="document is empty after cleaning", report=None):
        super().__init__(message)
        self.report = report


# dedup
class EmptyDocument(DataError):
    pass


class SignatureMismatch(DataError):
    pass


# tokenizer
class CorpusTooSmall(DataError):
    pass


class UnknownId(DataError):
    pass


class MalformedVocabFile(DataError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


# corpus
class BadHeader(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class DocumentExceedsShard(DataError):
    pass


# budget
class OutOfRange(DataError):
    pass


# tokeval
class EmptyCorpus(DataError):
    pass


# evalmetrics
class TemplateSlotMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyReference(DataError):
    pass


class MissingRuns(DataError):
    def __init__(self, missing, expected):
        self.missing = list(missing)
        self.expected = expected
        super().__init__(
            f"expected {expected} prediction file(s); missing: {', '.join(self.missing)}"
        )


# pipeline
class StageFailed(CurationError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', EXIT_DATA)
        super().__init__(f"stage '{stage}' failed: {cause}")
