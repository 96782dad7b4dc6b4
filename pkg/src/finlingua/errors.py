"""Exception types shared across the pipeline."""


class FinlinguaError(Exception):
    """Base class for all pipeline errors."""


class MalformedLexiconError(FinlinguaError):
    """Lexicon file could not be parsed; message names the offending line."""

    def __init__(self, path, line_no, reason):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class LexiconValidationError(FinlinguaError):
    """Parsed lexicon violates an invariant (e.g. a term in two voting classes)."""


class NormalizationIncompleteError(FinlinguaError):
    """Gloss-mode normalization left too much of the utterance untranslated.

    Carries the partial canonical text so the caller can still route the
    query (typically to general_faq).
    """

    def __init__(self, partial_text, unglossed_ratio):
        self.partial_text = partial_text
        self.unglossed_ratio = unglossed_ratio
        super().__init__(
            f"normalization incomplete ({unglossed_ratio:.0%} unglossable): {partial_text!r}"
        )


class IngestionError(FinlinguaError):
    """Fund dataset row failed validation; names the row and field."""

    def __init__(self, row_no, field, reason):
        self.row_no = row_no
        self.field = field
        super().__init__(f"row {row_no}, field {field!r}: {reason}")


class FundNotFoundError(FinlinguaError):
    """No fund matched the name query above the similarity floor."""

    def __init__(self, name_query):
        self.name_query = name_query
        super().__init__(f"no fund matching {name_query!r}")


class EmptyPortfolioError(FinlinguaError):
    """Portfolio has no holdings (distinct from a 0% metric)."""


class DataIntegrityError(FinlinguaError):
    """A portfolio holding references a fund_id absent from the store."""


class TemplateGapError(FinlinguaError):
    """No template asset exists for the requested (intent, language) pair."""

    def __init__(self, intent, tag):
        self.intent = intent
        self.tag = tag
        super().__init__(f"no template for intent={intent} tag={tag}")


class BackendUnavailableError(FinlinguaError):
    """Backend endpoint failed after exhausting retries; callers fall back."""


class BackendProtocolError(FinlinguaError):
    """Backend answered, but not in the agreed wire shape."""


class SuiteParseError(FinlinguaError):
    """Golden suite file is malformed; names the file (and line where known)."""
