"""Exception types shared across the package."""


class IgnnError(Exception):
    pass


class DimensionError(IgnnError, ValueError):
    pass


class EdgeRangeError(IgnnError, ValueError):
    def __init__(self, edge, num_nodes):
        self.edge = tuple(edge)
        self.num_nodes = num_nodes
        super().__init__(f"edge {self.edge} has an endpoint outside [0, {num_nodes})")


class ConvergenceError(IgnnError, RuntimeError):
    """Iterative method stopped at ``max_iters``; ``estimate`` holds the last iterate."""

    def __init__(self, message, estimate):
        self.estimate = estimate
        super().__init__(f"{message} (last estimate {estimate!r})")


class DivergenceError(IgnnError, FloatingPointError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")


class DatasetError(IgnnError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ConfigError(IgnnError, ValueError):
    pass
