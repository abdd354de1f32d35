"""Exceptions raised across the toolkit.

Each concrete error also derives from the builtin a caller would naturally
catch, so ``except ValueError`` keeps working for bad inputs.
"""


def _rebuild(cls, args, state):
    err = cls.__new__(cls)
    err.args = args
    err.__dict__.update(state)
    return err


class HyperrectError(Exception):
    # subclasses take structured constructor arguments; pickle by state so
    # errors survive the trip back from joblib workers
    def __reduce__(self):
        return _rebuild, (type(self), self.args, self.__dict__)


class EmptyScoreSetError(HyperrectError, ValueError):
    def __init__(self, msg: str = "empty score set"):
        super().__init__(msg)


class InvalidLevelError(HyperrectError, ValueError):
    def __init__(self, level: float):
        super().__init__(f"invalid level: {level!r} (must lie in (0, 1))")
        self.level = level


class SplitTooSmallError(HyperrectError, ValueError):
    def __init__(self, detail: str = ""):
        super().__init__(f"split too small{': ' + detail if detail else ''}")


class SingularDesignError(HyperrectError, ValueError):
    def __init__(self, rank: int, m: int):
        super().__init__(f"singular design: rank {rank} < {m} features")
        self.rank = rank


class UnderdeterminedError(HyperrectError, ValueError):
    def __init__(self, n: int, m: int):
        super().__init__(f"underdetermined: {n} rows for {m} features")


class ConvergenceError(HyperrectError, RuntimeError):
    def __init__(self, msg: str, loss_gap: float):
        super().__init__(f"{msg} (loss gap {loss_gap:.3g})")
        self.loss_gap = loss_gap


class InvertedIntervalError(HyperrectError, ValueError):
    def __init__(self, lo: float, hi: float):
        super().__init__(f"inverted interval: lo={lo} > hi={hi}")


class DegenerateSideError(HyperrectError, ValueError):
    def __init__(self, detail: str = ""):
        super().__init__(f"degenerate side{': ' + detail if detail else ''}")


class CorrelationError(HyperrectError, ValueError):
    def __init__(self, detail: str = ""):
        super().__init__(f"correlation not positive definite{': ' + detail if detail else ''}")


class DimensionMismatchError(HyperrectError, ValueError):
    pass


class DataFormatError(HyperrectError, ValueError):
    pass


class ReplicateError(HyperrectError, RuntimeError):
    def __init__(self, replicate: int, seed: int, cause: BaseException):
        super().__init__(f"replicate {replicate} (seed {seed}) failed: {cause}")
        self.replicate = replicate
        self.seed = seed
        self.cause = cause
