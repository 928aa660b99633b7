"""Exception types shared across the engine.

Each error carries enough context (file, line, label) to print a one-line
diagnostic from the CLI without a traceback.
"""


class AssistantError(Exception):
    """Base class for all engine errors."""


# --- featurization / embeddings ---

class EmptyTrainingSet(AssistantError):
    pass


class InvalidPattern(AssistantError):
    def __init__(self, name: str, pattern: str, cause: str):
        super().__init__(f"regex feature {name!r}: bad pattern {pattern!r}: {cause}")
        self.name = name
        self.pattern = pattern


class MalformedLine(AssistantError):
    def __init__(self, line_no: int, detail: str = ""):
        super().__init__(f"embedding file line {line_no}: malformed{': ' + detail if detail else ''}")
        self.line_no = line_no


class InconsistentDimension(AssistantError):
    def __init__(self, line_no: int, expected: int, got: int):
        super().__init__(f"embedding file line {line_no}: expected {expected} values, got {got}")
        self.line_no = line_no


class EmptyFile(AssistantError):
    pass


class RowCountMismatch(AssistantError):
    pass


# --- models ---

class ShapeMismatch(AssistantError):
    pass


class UnknownIntent(AssistantError):
    def __init__(self, intent: str):
        super().__init__(f"intent {intent!r} is not in the trained label set")
        self.intent = intent


class MaskingDisabled(AssistantError):
    pass


class EmptySequence(AssistantError):
    pass


class EmptyMessage(AssistantError):
    pass


class EntityAlignmentError(AssistantError):
    def __init__(self, example_id, detail: str = ""):
        message = f"example {example_id}: entity span does not align to token boundaries"
        super().__init__(message + (f" ({detail})" if detail else ""))
        self.example_id = example_id


class EmptyStories(AssistantError):
    pass


class UnknownDomainReference(AssistantError):
    def __init__(self, story: str, step: str):
        super().__init__(f"story {story!r}: undeclared reference {step!r}")
        self.story = story
        self.step = step


# --- dialogue / sessions ---

class UndeclaredAction(AssistantError):
    def __init__(self, action: str):
        super().__init__(f"action {action!r} is not declared in the domain")
        self.action = action


class CorruptEvent(AssistantError):
    def __init__(self, index: int, detail: str = ""):
        super().__init__(f"event {index}: corrupt{': ' + detail if detail else ''}")
        self.index = index


class EngineNotReady(AssistantError):
    pass


# --- knowledge base ---

class MissingFile(AssistantError):
    def __init__(self, name: str):
        super().__init__(f"file missing: {name}")
        self.name = name


class BadHeader(AssistantError):
    def __init__(self, file: str, expected: str, got: str):
        super().__init__(f"{file}: expected header {expected!r}, got {got!r}")
        self.file = file


class DuplicateKey(AssistantError):
    def __init__(self, file: str, row: int, key):
        super().__init__(f"{file} row {row}: duplicate key {key!r} after normalization")
        self.file = file
        self.row = row


class FieldTooLong(AssistantError):
    def __init__(self, file: str, row: int, field: str, limit: int):
        super().__init__(f"{file} row {row}: field {field!r} exceeds {limit} characters")
        self.file = file
        self.row = row
        self.field = field


class EmptyField(AssistantError):
    def __init__(self, file: str, row: int, field: str):
        super().__init__(f"{file} row {row}: field {field!r} must not be empty")
        self.file = file
        self.row = row
        self.field = field


# --- evaluation / config ---

class EmptyTestSet(AssistantError):
    pass


class TooFewExamples(UserWarning):
    """Raised as a warning, not an error: the intent stays in the train split."""

    def __init__(self, intent: str):
        super().__init__(f"intent {intent!r} has a single example; kept in train")
        self.intent = intent


class ConfigError(AssistantError):
    pass


class BundleVersionError(AssistantError):
    def __init__(self, found, expected: int):
        super().__init__(f"model bundle format_version {found!r} is not supported (expected {expected})")
        self.found = found
