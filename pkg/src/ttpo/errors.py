"""Exception hierarchy with stable machine-readable error codes.

Every error the CLI can surface carries a ``code`` string that is emitted
as ``{"code": ..., "message": ...}`` JSON on stderr, so scripted callers
never have to parse prose.
"""


class TtpoError(Exception):
    """Base class; ``code`` is the machine-readable identifier."""

    code = "error"

    def to_json(self) -> dict:
        return {"code": self.code, "message": str(self)}


class InvalidInputError(TtpoError):
    code = "invalid-input"


class InvalidConfigError(TtpoError):
    code = "invalid-config"


class InvalidScheduleError(TtpoError):
    code = "invalid-schedule"


class NoiseScaleError(TtpoError):
    code = "noise-scale-out-of-bounds"


class TooFewCandidatesError(TtpoError):
    code = "too-few-candidates"


class UndefinedSimilarityError(TtpoError):
    code = "undefined-similarity"


class GuidanceDivergedError(TtpoError):
    code = "guidance-diverged"

    def __init__(self, message: str, step: int | None = None, t: float | None = None):
        super().__init__(message)
        self.step = step
        self.t = t


class SelectionPendingError(TtpoError):
    code = "selection-pending"
