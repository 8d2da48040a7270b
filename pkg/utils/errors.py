from typing import List, Optional


class SocioKBError(Exception):

    def __init__(self, message: str, source: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.source = source
        self.line = line

    def __str__(self) -> str:
        location = ""
        if self.source:
            location = f"{self.source}:"
        if self.line is not None:
            location += f"{self.line}:"
        return f"{location} {self.message}" if location else self.message


# ----------------------------------------------------------------------
# Validation family (exit code 2)
# ----------------------------------------------------------------------

class ValidationError(SocioKBError, ValueError):
    pass


class SchemaError(ValidationError):
    pass


class FactError(ValidationError):
    pass


class RuleSyntaxError(ValidationError):

    def __init__(self, message: str, line: int, column: int, source: Optional[str] = None):
        super().__init__(f"{message} (column {column})", source=source, line=line)
        self.column = column


class RuleValidationError(ValidationError):

    def __init__(self, diagnostics: List, source: Optional[str] = None):
        lines = "; ".join(str(d) for d in diagnostics)
        super().__init__(f"rule validation failed: {lines}", source=source)
        self.diagnostics = list(diagnostics)


class QuestionnaireError(ValidationError):
    pass


class ResponseError(ValidationError):
    pass


# ----------------------------------------------------------------------
# Runtime family (exit code 3)
# ----------------------------------------------------------------------

class RuntimeFailure(SocioKBError, RuntimeError):
    pass


class SaturationLimitError(RuntimeFailure):
    pass


class NetworkError(RuntimeFailure):
    pass


class WriteBackError(RuntimeFailure):
    pass
