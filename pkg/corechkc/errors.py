from __future__ import annotations


class ModelError(Exception):
    """Base class for every error raised by the model pipeline."""


class ParseError(ModelError):
    """Raised when program text does not match the s-expression grammar."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class TypeCheckError(ModelError):
    """Raised when a typing rule's premise fails; ``rule`` names the rule."""

    def __init__(self, rule: str, message: str):
        self.rule = rule
        self.message = message
        super().__init__(f"{rule}: {message}")


class WellFormednessError(ModelError):
    """Raised when a struct or function definition is not well formed."""

    def __init__(self, subject: str, message: str):
        self.subject = subject
        self.message = message
        super().__init__(f"{subject}: {message}")


class TypeSizeError(ModelError):
    """Raised when a type's size cannot be computed under the current stack."""


class CompileError(ModelError):
    """Raised when a compilation premise cannot be met."""


class EmitError(ModelError):
    """Raised when a construct has no Checked C rendering."""
