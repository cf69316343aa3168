from dataclasses import dataclass

from .errors import DomainError

EPOCH_SECONDS = 700.0
BLOCK_SECONDS = 14.0


@dataclass(frozen=True)
class ProtocolParams:
    """Contract constants. Defaults are the benchmark parametrisation."""

    epoch_length: int = 50
    gamma: float = 7e-3
    beta: float = 2e-7
    p: float = 0.5
    finality_threshold: float = 2 / 3
    min_fork_choice_deposit: float = 1.0
    block_time: float = BLOCK_SECONDS
    # smallest deposit amount the worst-case adversary keeps between itself and the threshold
    deposit_quantum: float = 1e-9
    slash_window_epochs: int = 1728

    def __post_init__(self):
        if self.epoch_length < 1:
            raise DomainError(f"epoch_length must be >= 1, got {self.epoch_length}")
        for name in ("gamma", "beta", "p", "block_time"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.5 < self.finality_threshold <= 1:
            raise DomainError(
                f"finality_threshold must lie in (1/2, 1], got {self.finality_threshold}"
            )
        if self.slash_window_epochs < 1:
            raise DomainError("slash_window_epochs must be >= 1")

    @property
    def l(self) -> int:
        return self.epoch_length


DEFAULT_PARAMS = ProtocolParams()
