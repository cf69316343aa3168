"""Closed-form and numerical reproductions: recovery times, race odds, incentive tables, gas."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError
from .params import DEFAULT_PARAMS, EPOCH_SECONDS, ProtocolParams
from .rewards import individual_reward_factor, update_deposit
from .finality import supermajority
from .strategies import worst_case_delta

D0_DEFAULT = 1e7
PHI_CAP = 10**6
EPOCHS_PER_YEAR = 365 * 86400 // EPOCH_SECONDS


class PhiDiverged(RuntimeError):
    pass


def _recovery_epochs(offline: float, params: ProtocolParams, D0: float) -> int:
    honest = (1 - offline) * D0
    silent = offline * D0
    threshold = params.finality_threshold
    esf = 2
    k = 0
    while not supermajority(honest, honest + silent, threshold):
        if k >= PHI_CAP:
            raise PhiDiverged(f"no recovery within {PHI_CAP} epochs for offline share {offline}")
        rho = individual_reward_factor(honest + silent, esf, params)
        silent = update_deposit(silent, False, rho, 0.0)
        esf += 1
        k += 1
    return k


def phi(alpha: float, params: ProtocolParams = DEFAULT_PARAMS, D0: float = D0_DEFAULT) -> int:
    """Epochs until finalization resumes after a share ``alpha`` of stake stops voting.

    The silent deposits shrink by ``1/(1+rho_i)`` each epoch while the voters
    are held constant. Once the voters hold the threshold share they justify
    in that epoch and finalize in the next, so the count is the number of
    penalty epochs plus one. Returns 0 when the voters never lost the
    threshold to begin with.
    """
    if not 0 <= alpha < 1:
        raise DomainError(f"offline share must lie in [0, 1), got {alpha}")
    if supermajority(1 - alpha, 1.0, params.finality_threshold):
        return 0
    return _recovery_epochs(alpha, params, D0) + 1


def phi_honest(alpha_honest: float, params: ProtocolParams = DEFAULT_PARAMS,
               D0: float = D0_DEFAULT) -> int:
    """``phi`` keyed by the share that keeps voting."""
    if not 0 < alpha_honest <= 1:
        raise DomainError(f"honest share must lie in (0, 1], got {alpha_honest}")
    return phi(1 - alpha_honest, params, D0)


def worst_case_trajectory(alpha0: float, params: ProtocolParams = DEFAULT_PARAMS,
                          D0: float = D0_DEFAULT) -> list[tuple[float, float]]:
    """Per-epoch (alpha_i, delta_i) under the finalization-delaying adversary.

    ``alpha0`` is the honest share. Each epoch the adversary votes with the
    largest fraction that keeps participation at the threshold, so its
    voting part is held and the rest decays. Stops once the honest share
    alone exceeds the threshold.
    """
    if not 0 < alpha0 <= params.finality_threshold + 1e-12:
        raise DomainError(f"alpha0 must lie in (0, 2/3], got {alpha0}")
    honest = alpha0 * D0
    adv = (1 - alpha0) * D0
    esf = 2
    out = []
    while True:
        total = honest + adv
        a = honest / total
        if a > params.finality_threshold:
            return out
        d = worst_case_delta(a, params.finality_threshold)
        out.append((a, d))
        if len(out) > PHI_CAP:
            raise PhiDiverged(f"worst-case recursion did not end within {PHI_CAP} epochs")
        rho = individual_reward_factor(total, esf, params)
        adv = d * adv + update_deposit((1 - d) * adv, False, rho, 0.0)
        esf += 1


def worst_case_T(alpha0: float, params: ProtocolParams = DEFAULT_PARAMS,
                 D0: float = D0_DEFAULT) -> int:
    """Epochs the worst-case adversary can keep finalization paused, same units as ``phi``."""
    k = len(worst_case_trajectory(alpha0, params, D0))
    return 0 if k == 0 else k + 1


@dataclass(frozen=True)
class RaceSpec:
    n1: int
    n2: int
    mu: float

    def __post_init__(self):
        if int(self.n1) != self.n1 or int(self.n2) != self.n2 or self.n1 < 1 or self.n2 < 1:
            raise DomainError(f"n1 and n2 must be integers >= 1, got {self.n1}, {self.n2}")
        if not 0 < self.mu < 1:
            raise DomainError(f"mu must lie in (0, 1), got {self.mu}")


@dataclass(frozen=True)
class RaceResult:
    probability: float
    log_probability: float
    underflow: bool


def _log_binom_tail(n: int, k0: int, mu: float) -> float:
    """log P(Binomial(n, mu) >= k0), summed exactly term by term."""
    if k0 <= 0:
        return 0.0
    if k0 > n:
        return -math.inf
    k = np.arange(k0, n + 1, dtype=np.float64)
    terms = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
             + k * math.log(mu) + (n - k) * math.log1p(-mu))
    return float(min(0.0, logsumexp(terms)))


def race(spec: RaceSpec) -> RaceResult:
    """P(chain 1 produces ``n1`` blocks before chain 2 produces ``n2``).

    Equals the regularized incomplete beta ``I_mu(n1, n2)``, evaluated as
    the binomial tail P(Bin(n1+n2-1, mu) >= n1). Results below the smallest
    double are reported as 0 with ``underflow`` set; the log value stays
    finite.
    """
    logp = _log_binom_tail(spec.n1 + spec.n2 - 1, spec.n1, spec.mu)
    p = math.exp(logp)
    return RaceResult(p, logp, p == 0.0 and logp > -math.inf)


def race_probability(n1, n2: Optional[int] = None, mu: Optional[float] = None) -> float:
    spec = n1 if isinstance(n1, RaceSpec) else RaceSpec(n1, n2, mu)
    return race(spec).probability


def race_log_probability(n1, n2: Optional[int] = None, mu: Optional[float] = None) -> float:
    spec = n1 if isinstance(n1, RaceSpec) else RaceSpec(n1, n2, mu)
    return race(spec).log_probability


def race_monte_carlo(spec: RaceSpec, samples: int = 10**6, seed: int = 0) -> tuple[float, float]:
    """Erlang-race estimate of ``race_probability`` and its standard error."""
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.gamma(spec.n1, 1 / spec.mu, samples)
    y = rng.gamma(spec.n2, 1 / (1 - spec.mu), samples)
    p = float(np.mean(x < y))
    return p, math.sqrt(max(p * (1 - p), 1e-300) / samples)


def mu_breakeven(n1: int, n2: int) -> float:
    """Mining share at which ``mu/(1-mu) = n1/n2``."""
    if n1 < 1 or n2 < 1:
        raise DomainError(f"n1 and n2 must be >= 1, got {n1}, {n2}")
    return n1 / (n1 + n2)


SCENARIOS = ("always_justified", "never_justified", "swing_voter")


@dataclass(frozen=True)
class IncentiveRow:
    """Relative losses, loss ratios and griefing factors for one abstention scenario.

    ``plr_*`` is a group's relative loss over the abstainer's. ``gf_*`` is
    the same ratio in absolute terms: the group's stake over the abstainer's
    times its PLR. The ``*_others`` columns aggregate voters and non-voters.
    """

    scenario: str
    alpha: float
    mu: float
    rho: float
    loss_nu: float
    loss_voters: float
    loss_nonvoters: float
    plr_voters: float
    plr_nonvoters: float
    gf_voters: float
    gf_nonvoters: float
    loss_others: float
    plr_others: float
    gf_others: float


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else 0.0


def incentive_tables(alpha: float, mu: float, rho: float) -> list[IncentiveRow]:
    """Losses when a validator holding ``alpha`` of deposits abstains.

    ``mu`` is the share of the abstainer plus everyone who votes, so other
    voters hold ``mu - alpha`` and non-voters ``1 - mu``. Each entry is the
    difference between the deposit factor had the abstainer voted and the
    factor it actually gets.
    """
    if not 0 < alpha < 2 / 3:
        raise DomainError(f"alpha must lie in (0, 2/3), got {alpha}")
    if not alpha <= mu <= 1:
        raise DomainError(f"mu must lie in [alpha, 1], got {mu}")
    if not rho >= 0 or math.isinf(rho):
        raise DomainError(f"rho must be finite and >= 0, got {rho}")

    stake_v = mu - alpha
    stake_n = 1 - mu
    r = rho / (1 + rho)
    base = 1 + 0.5 * (mu * rho + alpha)

    cases = {
        # the abstention only shrinks the collective reward
        "always_justified": (
            r * base,
            0.5 * alpha * rho,
            r * 0.5 * alpha,
        ),
        # nobody earned the collective reward anyway
        "never_justified": (r, 0.0, 0.0),
        # the abstainer was pivotal, so the collective reward vanishes for everyone
        "swing_voter": (
            r * (1 + 0.5 * mu * (1 + rho)),
            0.5 * mu * rho,
            r * 0.5 * mu,
        ),
    }
    rows = []
    for name in SCENARIOS:
        l_nu, l_v, l_n = cases[name]
        plr_v = _ratio(l_v, l_nu)
        plr_n = _ratio(l_n, l_nu)
        abs_nu = alpha * l_nu
        abs_others = stake_v * l_v + stake_n * l_n
        rel_others = _ratio(abs_others, 1 - alpha)
        rows.append(IncentiveRow(
            scenario=name, alpha=alpha, mu=mu, rho=rho,
            loss_nu=l_nu, loss_voters=l_v, loss_nonvoters=l_n,
            plr_voters=plr_v, plr_nonvoters=plr_n,
            gf_voters=stake_v / alpha * plr_v,
            gf_nonvoters=stake_n / alpha * plr_n,
            loss_others=rel_others,
            plr_others=_ratio(rel_others, l_nu),
            gf_others=_ratio(abs_others, abs_nu),
        ))
    return rows


def gas_overhead(n_validators: float, vote_gas: float, init_gas: float, block_gas_limit: float,
                 l: int = 50, vote_window_blocks: int = 37) -> tuple[float, float]:
    """Share of block gas spent on epoch initialization and on votes."""
    if block_gas_limit <= 0 or not 0 < vote_window_blocks < l:
        raise DomainError("need a positive gas limit and 0 < vote window < epoch length")
    init_fraction = init_gas / ((l - vote_window_blocks) * block_gas_limit)
    vote_fraction = n_validators * vote_gas / (vote_window_blocks * block_gas_limit)
    return init_fraction, vote_fraction


def max_validators(vote_gas: float, block_gas_limit: float, vote_window_blocks: int = 37) -> int:
    """Validators whose votes still fit in the vote window."""
    return int(vote_window_blocks * block_gas_limit // vote_gas)


def annual_interest(total_deposit: float = D0_DEFAULT, params: ProtocolParams = DEFAULT_PARAMS,
                    epochs: int = EPOCHS_PER_YEAR) -> float:
    """Yearly growth of a voter's deposit in the ideal run (all vote, ESF 2)."""
    rho = individual_reward_factor(total_deposit, 2, params)
    per_epoch = update_deposit(1.0, True, rho, 0.5 * rho)
    return per_epoch ** epochs - 1


def offline_half_life(offline: float = 0.5, params: ProtocolParams = DEFAULT_PARAMS,
                      D0: float = D0_DEFAULT) -> int:
    """Epochs until silent validators have lost half of their deposits.

    The voters keep their deposits (no finalization, so no collective
    reward) while the silent part leaks with the growing ESF penalty.
    """
    honest = (1 - offline) * D0
    silent = offline * D0
    start = silent
    esf = 2
    k = 0
    while silent > 0.5 * start:
        if k >= PHI_CAP:
            raise PhiDiverged("silent deposits never halved")
        rho = individual_reward_factor(honest + silent, esf, params)
        silent = update_deposit(silent, False, rho, 0.0)
        esf += 1
        k += 1
    return k


def to_csv(rows: Iterable, header: Optional[dict] = None, columns: Optional[Sequence[str]] = None) -> str:
    """Render dataclass rows or dicts as CSV, with ``# key: value`` header lines first."""
    rows = [asdict(r) if hasattr(r, "__dataclass_fields__") else dict(r) for r in rows]
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {v}\n")
    if columns is None:
        columns = list(rows[0]) if rows else []
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def phi_curve(alphas: Iterable[float], params: ProtocolParams = DEFAULT_PARAMS,
              D0: float = D0_DEFAULT) -> list[dict]:
    return [{"alpha": a, "phi": phi(a, params, D0)} for a in alphas]


def race_curve(n1: int, n2: int, mus: Iterable[float]) -> list[dict]:
    out = []
    for mu in mus:
        r = race(RaceSpec(n1, n2, mu))
        out.append({"n1": n1, "n2": n2, "mu": mu, "probability": r.probability,
                    "log_probability": r.log_probability, "underflow": r.underflow})
    return out


INCENTIVE_COLUMNS = [f.name for f in fields(IncentiveRow)]
