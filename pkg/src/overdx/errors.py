"""Exception hierarchy.

Everything raised for bad input derives from :class:`InputError` so the CLI
can map it to exit code 1; anything else is treated as an internal failure.
"""


class InputError(ValueError):
    """Invalid user-supplied data or configuration."""


class SchemaError(InputError):
    """A required column or key is missing."""


class RowError(InputError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class VocabularyError(RowError):
    pass


class XESParseError(InputError):
    pass


class MissingAttributesError(InputError):
    def __init__(self, case_ids):
        self.case_ids = sorted(case_ids)
        shown = ", ".join(self.case_ids[:10])
        more = f" (+{len(self.case_ids) - 10} more)" if len(self.case_ids) > 10 else ""
        super().__init__(f"missing case attributes for: {shown}{more}")


class ConfigError(InputError):
    pass


class DimensionError(InputError):
    pass


class EmptyInputError(InputError):
    pass
