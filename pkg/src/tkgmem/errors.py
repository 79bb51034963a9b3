"""Exception types shared across the engine."""


class TkgError(Exception):
    """Base class for all engine errors."""


class EmptyContent(TkgError):
    """Episode content was empty or whitespace-only."""


class DuplicateId(TkgError):
    """An object with this id already exists."""


class SelfLoop(TkgError):
    """Semantic edge has identical source and target."""


class DanglingReference(TkgError):
    """A mutation referenced a node/episode that is not stored."""


class UnknownId(TkgError):
    """Lookup by id found nothing."""


class AlreadyIngested(TkgError):
    """The episode id was ingested before; the graph is unchanged."""


class CorruptStore(TkgError):
    """Store file failed magic/version/checksum validation."""


class DimensionMismatch(TkgError):
    """Vector length differs from the graph's configured dimension."""


class InvalidInterval(TkgError):
    """Timestamp pair violates ordering (valid <= invalid, created <= expired)."""


class ValidationError(TkgError):
    """Object violates a structural invariant."""


class ExtractorError(TkgError):
    """Extractor adapter failed; the triggering ingest is rolled back."""


class ConfigError(TkgError):
    """Configuration file or environment override is invalid."""
