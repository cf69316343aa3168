class CasperError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CasperError, ValueError):
    pass


class UnknownParent(CasperError, KeyError):
    pass


class UnknownBlock(CasperError, KeyError):
    pass


class DuplicateId(CasperError, ValueError):
    pass


class InvalidBlock(CasperError, ValueError):
    pass


class DuplicateVote(CasperError, ValueError):
    pass


class NegativeDeposit(CasperError, ArithmeticError):
    pass


class InvalidEvidence(CasperError, ValueError):
    pass


class AlreadySlashed(CasperError, ValueError):
    pass


class ConfigError(CasperError, ValueError):
    """Scenario configuration problem; ``problems`` lists one message per bad field."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NeverFinalized(CasperError, LookupError):
    pass
