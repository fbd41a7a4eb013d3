"""Shared exception types."""


class ContractViolationError(ValueError):
    """An operation was called with arguments violating its contract."""


class DomainError(ValueError):
    """A numeric argument is outside the mathematical domain of the operation."""


class NonFiniteGradientError(RuntimeError):
    """An optimizer step received a NaN or infinite gradient; the step was rejected."""


class EnvironmentFaultError(RuntimeError):
    """An environment produced or received a non-finite state or action."""


class UnsupportedOracleError(RuntimeError):
    """An analytic oracle was requested for an environment that does not admit one."""


class SamplerDivergenceError(RuntimeError):
    """The diffusion sampler produced a non-finite iterate."""

    def __init__(self, step_index: int, sigma: float):
        self.step_index = step_index
        self.sigma = sigma
        super().__init__(
            f"sampler diverged at denoising step {step_index} (sigma={sigma:.4g})"
        )


class ConfigError(ValueError):
    """A run configuration failed to parse or validate."""


class CheckpointIntegrityError(RuntimeError):
    """A checkpoint file is corrupt or its content hash does not match."""
