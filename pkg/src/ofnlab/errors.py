"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments outside its contract."""


class ConfigError(ValueError):
    """A configuration value is outside its documented domain."""


class DivergenceError(RuntimeError):
    """A loss or gradient became non-finite during an update.

    Carries the name of the first offending parameter (or "loss") so the
    harness can log which component blew up before continuing the run.
    """

    def __init__(self, parameter: str, detail: str = ""):
        self.parameter = parameter
        msg = f"non-finite value in {parameter!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
