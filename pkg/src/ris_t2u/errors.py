"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment or scenario configuration; ``key`` names the offending entry."""

    category = "config"

    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


class DimensionError(ValueError):
    """Beamformer or gain arrays with inconsistent shapes."""

    category = "structure"


class ExperimentError(RuntimeError):
    """Failure inside an experiment run, tagged with the experiment and sweep point."""

    category = "runtime"
