"""Exception types shared across the package."""


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, where: str, value: float):
        super().__init__(f"divergence at {where}: loss={value}")
        self.where = where
        self.value = value


class StageError(RuntimeError):
    """A pipeline stage failed."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
