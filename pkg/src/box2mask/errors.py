"""Exception hierarchy for box2mask.

Everything raised on purpose derives from Box2MaskError so the CLI can
catch one type and turn it into an exit code.
"""


class Box2MaskError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(Box2MaskError):
    """An input value violates a structural invariant (shape, range, dtype)."""


class ParameterError(Box2MaskError):
    """A tunable parameter is outside its legal range."""


class ConfigError(Box2MaskError):
    """A config / manifest file is malformed or inconsistent."""


class ExtractorError(Box2MaskError):
    """A feature extractor could not be initialised or used."""


class BankError(Box2MaskError):
    """An embedding bank could not be built or does not match its consumer."""
