"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A layer/block/accelerator combination that the hardware cannot run."""


class VerificationError(AssertionError):
    """Simulator output disagrees with the golden reference."""
