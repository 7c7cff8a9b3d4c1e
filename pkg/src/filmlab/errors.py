"""Exception hierarchy for filmlab."""


class FilmLabError(Exception):
    """Base class for all package errors."""


class NonPositiveInterval(FilmLabError, ValueError):
    pass


class NegativeHeight(FilmLabError, ValueError):
    pass


class DegenerateColumn(FilmLabError, ValueError):
    pass


class MeshQualityError(FilmLabError, ValueError):
    pass


class InvalidMaterials(FilmLabError, ValueError):
    pass


class InvalidTensions(FilmLabError, ValueError):
    pass


class SingularSystem(FilmLabError, RuntimeError):
    pass


class NonConvergence(FilmLabError, RuntimeError):
    pass


class MeshMismatch(FilmLabError, ValueError):
    pass


class BadSpec(FilmLabError, ValueError):
    pass


class EigenFailure(FilmLabError, RuntimeError):
    pass


class EmptyBall(FilmLabError, ValueError):
    pass


class TooFewSegments(FilmLabError, ValueError):
    pass


class NoBorder(FilmLabError, ValueError):
    pass


class ConfigError(FilmLabError, ValueError):
    """Raised for malformed or inconsistent run configurations."""
