"""Exception types shared across the pipeline."""


class CorefPipeError(Exception):
    """Base class for all pipeline errors."""


class ConllParseError(CorefPipeError):
    """Malformed CoNLL input; message carries the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ConfigError(CorefPipeError):
    """Invalid configuration value or combination."""


class PredictionFormatError(CorefPipeError):
    """Prediction file fails schema validation."""


class ShapeError(CorefPipeError):
    """Tensor arguments have inconsistent shapes."""


class ReplyParseError(CorefPipeError):
    """An LLM reply does not follow the required output format."""


class RegroupingError(ReplyParseError):
    """A regrouping reply is not a valid partition of the cluster."""


class LlmTransportError(CorefPipeError):
    """The LLM endpoint stayed unreachable after all retries."""


class ScriptExhaustedError(CorefPipeError):
    """The scripted mock backend ran out of canned replies."""


class TrainingDivergedError(CorefPipeError):
    """Training produced a non-finite loss."""
