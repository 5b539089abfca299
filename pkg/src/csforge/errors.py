"""Exception hierarchy shared across the toolkit.

Exit-code mapping lives in the CLI: usage/validation errors exit 2,
runtime/transport errors exit 3.
"""


class CsforgeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(CsforgeError):
    """Bad input data or arguments; maps to exit code 2."""


class RuntimeFailure(CsforgeError):
    """Transport or runtime failure; maps to exit code 3."""


class ParseError(ValidationError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaError(ValidationError):
    def __init__(self, item_id: str, message: str):
        super().__init__(f"item {item_id!r}: {message}")
        self.item_id = item_id


class AlignmentError(ValidationError):
    def __init__(self, item_id: str, message: str):
        super().__init__(f"item {item_id!r}: {message}")
        self.item_id = item_id


class InsufficientItems(ValidationError):
    pass


class UncoverableSentence(ValidationError):
    """Lexicon covers zero words of the sentence."""


class MissingVariant(ValidationError):
    """Requested stem variant absent on the item."""


class ContractViolation(CsforgeError):
    """Caller broke an internal API contract (e.g. wrong vote arity)."""


class EndpointUnavailable(RuntimeFailure):
    """Transport or timeout failure after bounded retries."""


class MalformedCompletion(RuntimeFailure):
    """The endpoint returned an empty or unusable completion."""


class AbortThresholdExceeded(RuntimeFailure):
    """Generator failure rate exceeded the abort threshold."""


class FoldAborted(RuntimeFailure):
    """Too many transport failures while evaluating a fold."""
