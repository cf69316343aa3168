import math
import random

import pytest
from scipy.special import betainc

from casperffg.analysis import (EPOCHS_PER_YEAR, PhiDiverged, RaceSpec, annual_interest,
                                gas_overhead, incentive_tables, max_validators, mu_breakeven,
                                offline_half_life, phi, phi_curve, phi_honest, race,
                                race_curve, race_monte_carlo, race_probability, to_csv,
                                worst_case_T, worst_case_trajectory)
from casperffg.errors import DomainError
from casperffg.params import ProtocolParams
from casperffg.rewards import individual_reward_factor


def phi_oracle(offline, D0=1e7, gamma=7e-3, beta=2e-7, p=0.5):
    """Independent transcription of the recovery recursion."""
    voters = (1 - offline) * D0
    silent = offline * D0
    k = 0
    while 3 * voters < 2 * (voters + silent):
        rho = gamma / (voters + silent) ** p + beta * k
        silent = silent / (1 + rho)
        k += 1
    return k + 1 if k else 0


class TestPhi:
    @pytest.mark.parametrize("alpha,expected", [(0.67, 3733), (0.51, 2698), (0.49, 2546)])
    def test_benchmark_values(self, alpha, expected):
        assert phi(alpha) == expected

    @pytest.mark.parametrize("alpha", [0.34, 0.4, 0.45, 0.55, 0.6, 0.7, 0.8])
    def test_against_oracle(self, alpha):
        assert abs(phi(alpha) - phi_oracle(alpha)) <= 1

    def test_zero_when_voters_keep_threshold(self):
        assert phi(0.2) == 0
        assert phi(0.0) == 0

    def test_monotone_in_offline_share(self):
        values = [phi(a / 100) for a in range(34, 96, 3)]
        assert values == sorted(values)

    def test_honest_alias(self):
        assert phi_honest(0.33) == phi(1 - 0.33)

    def test_domain(self):
        with pytest.raises(DomainError):
            phi(1.0)
        with pytest.raises(DomainError):
            phi_honest(0.0)

    def test_cap(self):
        params = ProtocolParams(gamma=1e-12, beta=1e-15)
        with pytest.raises(PhiDiverged):
            phi(0.9, params)


class TestWorstCase:
    def test_boundary_small(self):
        assert worst_case_T(2 / 3) <= 3

    @pytest.mark.parametrize("alpha", [0.2, 0.35, 0.5, 0.6, 0.65])
    def test_at_least_phi(self, alpha):
        t = worst_case_T(alpha)
        assert math.isfinite(t)
        assert t >= phi_honest(alpha)

    def test_trajectory_respects_constraint(self):
        for a, d in worst_case_trajectory(0.5):
            assert a + d * (1 - a) <= 2 / 3 + 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            worst_case_T(0.9)


class TestRace:
    def test_case_one(self):
        assert race_probability(3, 3733, 0.004) > 0.9999

    @pytest.mark.parametrize("n1,n2,mu", [(3, 10, 0.3), (5, 5, 0.5), (1, 1, 0.2), (40, 7, 0.8)])
    def test_matches_scipy(self, n1, n2, mu):
        assert race_probability(n1, n2, mu) == pytest.approx(betainc(n1, n2, mu), rel=1e-10)

    def test_complement(self):
        rng = random.Random(5)
        for _ in range(200):
            n1, n2 = rng.randint(1, 400), rng.randint(1, 400)
            mu = rng.uniform(0.01, 0.99)
            total = race_probability(n1, n2, mu) + race_probability(n2, n1, 1 - mu)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_half(self):
        assert race_probability(7, 7, 0.5) == pytest.approx(0.5, abs=1e-14)

    def test_underflow_flagged(self):
        r = race(RaceSpec(2000, 2000, 0.01))
        assert r.probability == 0.0 and r.underflow
        assert r.log_probability < -745

    @pytest.mark.parametrize("spec", [RaceSpec(3, 10, 0.3), RaceSpec(5, 5, 0.5)])
    def test_monte_carlo(self, spec):
        est, se = race_monte_carlo(spec, samples=200_000, seed=11)
        assert abs(est - race_probability(spec)) < 3 * se + 1e-12

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            RaceSpec(0, 3, 0.5)
        with pytest.raises(DomainError):
            RaceSpec(3, 3, 1.0)

    def test_curve_rows(self):
        rows = race_curve(3, 3733, [0.001, 0.003])
        assert rows[1]["probability"] > rows[0]["probability"]


class TestBreakeven:
    def test_values(self):
        assert mu_breakeven(1, 1) == 0.5
        assert mu_breakeven(3, 3733) == pytest.approx(8.03e-4, rel=1e-3)
        assert mu_breakeven(3733, 3) == pytest.approx(0.999197, abs=1e-6)

    def test_is_root(self):
        mu = mu_breakeven(3, 3733)
        assert mu / (1 - mu) == pytest.approx(3 / 3733, rel=1e-12)


class TestIncentives:
    def test_never_row(self):
        rows = {r.scenario: r for r in incentive_tables(0.3, 0.9, 1e-6)}
        never = rows["never_justified"]
        assert never.loss_nu == pytest.approx(1e-6 / (1 + 1e-6))
        assert (never.loss_voters, never.loss_nonvoters) == (0.0, 0.0)
        assert never.plr_voters == never.gf_voters == never.gf_others == 0.0

    def test_closed_forms(self):
        a, mu, rho = 0.2, 0.8, 3e-3
        rows = {r.scenario: r for r in incentive_tables(a, mu, rho)}
        x = 1 + 0.5 * (mu * rho + a)
        always = rows["always_justified"]
        assert always.plr_voters == pytest.approx(0.5 * a * (1 + rho) / x, rel=1e-12)
        assert always.plr_nonvoters == pytest.approx(0.5 * a / x, rel=1e-12)
        assert always.gf_voters == pytest.approx(0.5 * (mu - a) * (1 + rho) / x, rel=1e-12)
        assert always.gf_nonvoters == pytest.approx(0.5 * (1 - mu) / x, rel=1e-12)
        y = 1 + 0.5 * mu * (1 + rho)
        swing = rows["swing_voter"]
        assert swing.plr_voters == pytest.approx(0.5 * mu * (1 + rho) / y, rel=1e-12)
        assert swing.plr_nonvoters == pytest.approx(0.5 * mu / y, rel=1e-12)
        assert swing.gf_voters == pytest.approx(0.5 * mu * (mu - a) * (1 + rho) / (a * y), rel=1e-12)
        assert swing.gf_nonvoters == pytest.approx(0.5 * mu * (1 - mu) / (a * y), rel=1e-12)

    def test_losses_from_deposit_update(self):
        """Table entries equal the deposit difference between voting and abstaining."""
        from casperffg.rewards import update_deposit
        a, mu, rho = 0.25, 0.9, 1e-3
        rows = {r.scenario: r for r in incentive_tables(a, mu, rho)}
        c_vote, c_abstain = 0.5 * mu * rho, 0.5 * (mu - a) * rho
        voter_loss = update_deposit(1, True, rho, c_vote) - update_deposit(1, True, rho, c_abstain)
        assert rows["always_justified"].loss_voters == pytest.approx(voter_loss, rel=1e-9)
        nu_loss = update_deposit(1, True, rho, c_vote) - update_deposit(1, False, rho, 0.0)
        assert rows["swing_voter"].loss_nu == pytest.approx(nu_loss, rel=1e-9)

    def test_ten_times(self):
        always = incentive_tables(0.2, 1.0, 1e-6)[0]
        assert always.loss_nu > 10 * always.loss_voters
        assert always.loss_nu > 10 * always.loss_nonvoters

    @pytest.mark.parametrize("alpha,mu,rho", [(0.0, 0.5, 0.1), (0.7, 0.8, 0.1), (0.3, 0.2, 0.1),
                                              (0.3, 0.5, -1.0), (0.3, 1.2, 0.1)])
    def test_domain(self, alpha, mu, rho):
        with pytest.raises(DomainError):
            incentive_tables(alpha, mu, rho)


class TestGasAndCalibration:
    def test_gas(self):
        init, vote = gas_overhead(100, 532031, 742393, 8e6, 50, 37)
        assert init == pytest.approx(0.0071, abs=5e-5)
        assert vote == pytest.approx(0.1797, abs=5e-5)

    def test_gas_edges(self):
        assert gas_overhead(0, 532031, 742393, 8e6)[1] == 0.0
        assert gas_overhead(592, 532031, 742393, 8e6)[1] == pytest.approx(1.06, abs=5e-3)
        assert max_validators(532031, 8e6) == 556
        with pytest.raises(DomainError):
            gas_overhead(1, 1, 1, 0)

    def test_annual_interest(self):
        assert EPOCHS_PER_YEAR == 45051
        assert 0.045 <= annual_interest() <= 0.055
        rho = individual_reward_factor(1e7, 2)
        assert annual_interest() == pytest.approx((1 + 0.5 * rho) ** 45051 - 1, rel=1e-9)

    def test_half_life(self):
        assert abs(offline_half_life(0.5) - 2592) <= 0.15 * 2592


class TestCsv:
    def test_header_and_rows(self):
        text = to_csv(phi_curve([0.2, 0.5]), {"tool": "x"})
        lines = text.splitlines()
        assert lines[0] == "# tool: x"
        assert lines[1] == "alpha,phi"
        assert lines[2] == "0.2,0"
        assert "\r" not in text
