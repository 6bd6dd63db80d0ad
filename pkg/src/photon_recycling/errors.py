"""Exception hierarchy. CLI exit codes key off these classes."""


class PhotonRecyclingError(Exception):
    pass


class ConfigError(PhotonRecyclingError, ValueError):
    """Malformed or inconsistent configuration / arguments."""


class CapacityError(PhotonRecyclingError):
    """Requested computation exceeds a hard size guard."""


class RegimeError(PhotonRecyclingError):
    """A modelling assumption (e.g. no-collision) is violated."""


class EstimateUndefinedError(PhotonRecyclingError):
    def __init__(self, k: int, msg: str | None = None):
        self.k = k
        super().__init__(msg or f"sector k={k} has no samples")


class FallbackRequiredError(PhotonRecyclingError):
    """Dependency factor outside [0, 1]; caller should fall back to plain linear solve."""

    def __init__(self, d_k: float):
        self.d_k = d_k
        super().__init__(f"dependency factor d_k={d_k:.6g} outside [0, 1]")


class FitDegenerateError(PhotonRecyclingError):
    pass


class UndefinedDependencyError(PhotonRecyclingError):
    pass


class CannotNormalizeError(PhotonRecyclingError):
    pass


class SingularSystemError(PhotonRecyclingError):
    pass
