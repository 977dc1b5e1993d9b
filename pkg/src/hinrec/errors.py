"""Exception types shared across the toolkit."""


class HinrecError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(HinrecError):
    """Invalid network schema or schema file."""


class GraphLoadError(HinrecError):
    """Malformed edge record or invariant violation during graph loading."""


class UnknownNodeError(HinrecError):
    """Node reference not present in the graph."""


class UnknownEdgeTypeError(HinrecError):
    """Edge type name not declared in the schema."""


class MetaPathError(HinrecError):
    """Meta-path fails type checking against the schema."""


class RelationSizeError(HinrecError):
    """Full expansion aborted because the result would exceed the entry cap."""


class RelationFormatError(HinrecError):
    """Malformed relation file."""


class ModelError(HinrecError):
    """Invalid state or arguments for a factorization model."""


class ConfigError(HinrecError):
    """Invalid experiment configuration."""


class StageError(HinrecError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
