"""Raw-text to CoNLL-U annotation adapter.

Wraps an NLP pipeline (a deterministic builtin one, or spaCy when
installed) to turn plain-text corpora into the annotated CoNLL-U files
the nlikit toolkit consumes.
"""

__version__ = "0.1.0"


class AnnotatorError(Exception):
    """Base error for the annotation adapter."""


class PipelineError(AnnotatorError):
    """The requested NLP pipeline is unavailable or failed to load."""


class JobError(AnnotatorError):
    """The annotation job definition is invalid."""
