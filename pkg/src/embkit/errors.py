"""Exception hierarchy shared across the toolkit."""


class EmbkitError(Exception):
    """Base class for all embkit errors."""


class RecordError(EmbkitError):
    """A line-delimited input file contains an invalid record.

    Carries the path and 1-based line number so callers can point at the
    offending line.
    """

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class ValidationError(EmbkitError):
    """An in-memory value violates a contract."""


class RerankTransportError(EmbkitError):
    """The reranker endpoint could not be reached; safe to retry."""


class RerankProtocolError(EmbkitError):
    """The reranker endpoint answered, but the response is malformed."""


class PipelineStageError(EmbkitError):
    """A pipeline stage failed; names the stage and the query being processed."""

    def __init__(self, stage, query_id, cause):
        self.stage = stage
        self.query_id = query_id
        self.cause = cause
        where = f"stage '{stage}'" + (f", query '{query_id}'" if query_id else "")
        super().__init__(f"{where}: {cause}")
