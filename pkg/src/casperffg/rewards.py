"""Reward factors and per-epoch deposit updates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .errors import NegativeDeposit
from .params import DEFAULT_PARAMS, ProtocolParams


@dataclass
class ValidatorState:
    id: object
    deposit: float
    voted_this_epoch: bool = False
    slashed: bool = False
    active: bool = True
    activation_epoch: int = 0
    logout_epoch: Optional[int] = None
    withdraw_epoch: Optional[int] = None

    @property
    def earning(self) -> bool:
        return self.active and not self.slashed


@dataclass(frozen=True)
class EpochAccounting:
    epoch: int
    total_deposit: float
    voted_fraction: float
    esf: int
    rho: float
    collective: float
    next_total_deposit: float = 0.0


def individual_reward_factor(total_deposit: float, esf: int,
                             params: ProtocolParams = DEFAULT_PARAMS) -> float:
    """Per-epoch interest/penalty rate rho.

    ESF below 2 would make the penalty term negative; the result is
    floored at 0, which never binds under the default constants.
    """
    if total_deposit <= 0:
        return 0.0
    rho = params.gamma * total_deposit ** -params.p + params.beta * (esf - 2)
    return max(0.0, rho)


def collective_reward_factor(voted_fraction: float, rho: float, esf: int,
                             finalizing: bool = True) -> float:
    """Bonus factor paid to everyone when finalization is on schedule.

    ``finalizing`` says whether the epoch actually finalized its
    predecessor; an epoch that starts with ESF 2 but fails to justify pays
    no collective reward.
    """
    if esf == 2 and finalizing:
        return 0.5 * voted_fraction * rho
    return 0.0


def update_deposit(deposit: float, voted: bool | int, rho: float, collective: float) -> float:
    # evaluation order keeps (1 + rho) / (1 + rho) == 1 exactly for voters when C = 0
    new = (1 + collective) * (1 + int(voted) * rho) / (1 + rho) * deposit
    if new < 0:
        raise NegativeDeposit(f"deposit update produced {new}")
    return new


def total_deposit(validators: Mapping[object, ValidatorState]) -> float:
    total = 0.0
    for v in validators.values():
        if v.earning:
            total += v.deposit
    return total


def voted_fraction(validators: Mapping[object, ValidatorState], total: float) -> float:
    if total <= 0:
        return 0.0
    voted = 0.0
    for v in validators.values():
        if v.earning and v.voted_this_epoch:
            voted += v.deposit
    return voted / total


def epoch_transition(validators: Mapping[object, ValidatorState], epoch: int, esf: int,
                     finalizing: bool, params: ProtocolParams = DEFAULT_PARAMS) -> EpochAccounting:
    """Close ``epoch``: apply rewards and penalties to every active validator in place.

    Epoch 0 has no checkpoint anyone can vote for, so deposits are left
    alone there. Pending validators are activated only when the epoch
    finalized on schedule.
    """
    d_i = total_deposit(validators)
    m_i = voted_fraction(validators, d_i)
    if epoch == 0:
        rho = coll = 0.0
    else:
        rho = individual_reward_factor(d_i, esf, params)
        coll = collective_reward_factor(m_i, rho, esf, finalizing)
        for v in validators.values():
            if v.earning:
                v.deposit = update_deposit(v.deposit, v.voted_this_epoch, rho, coll)
    admit = epoch <= 1 or finalizing
    for v in validators.values():
        v.voted_this_epoch = False
        if (admit and not v.active and not v.slashed and v.logout_epoch is None
                and v.activation_epoch <= epoch + 1):
            v.active = True
    return EpochAccounting(epoch, d_i, m_i, esf, rho, coll, total_deposit(validators))
