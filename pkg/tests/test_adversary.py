"""Eavesdropper strategies: analytic values vs Monte Carlo, strategy parsing,
ciphertext-only states."""

import math

import numpy as np
import pytest

from keyedqkd import (
    AttackStrategy,
    BasisAlphabet,
    ChannelModel,
    LfsrKeystream,
    LfsrSpec,
    ProtocolConfig,
    RepetitionKeystream,
    SeedKey,
    attack_block_guess,
    attack_fixed_basis,
    attack_intercept_resend,
    attack_key_guess,
    block_guess_trials,
    ciphertext_only_state,
    eve_error_key_granted,
    fixed_basis_induced_qber,
    key_guess_round,
    run_attack,
)
from keyedqkd.qubits import MeasBasis

PI = math.pi
BREIDBART_ERROR = (2.0 - math.sqrt(2.0)) / 4.0


def lfsr_config(n=10 ** 5, flip=0.0, loss=0.0, seed_text="10110101", taps="8:8,7,2,1", m=2):
    return ProtocolConfig(
        n=n, alphabet=BasisAlphabet(m),
        keystream=LfsrKeystream(LfsrSpec.from_text(taps), SeedKey.from_string(seed_text)),
        channel=ChannelModel(flip_prob=flip, loss=loss),
        code_rate=0.6, pa_security_param=64, verification_len=32,
    )


def repetition_config(n, key_bits):
    return ProtocolConfig(
        n=n, alphabet=BasisAlphabet(2),
        keystream=RepetitionKeystream(SeedKey.from_string(key_bits)),
        channel=ChannelModel(),
        code_rate=0.6, pa_security_param=64, verification_len=32,
    )


class TestStrategyParsing:
    def test_known_forms(self):
        assert AttackStrategy.parse("intercept").kind == "intercept_resend_random"
        assert AttackStrategy.parse("intercept:0.1").fraction == 0.1
        assert abs(AttackStrategy.parse("fixed:0.3927").phi - 0.3927) < 1e-12
        assert abs(AttackStrategy.parse("breidbart").phi - PI / 8) < 1e-15
        assert AttackStrategy.parse("keyguess").kind == "key_guess"
        assert AttackStrategy.parse("blockguess:15").k_blocks == 15

    def test_rejects_malformed(self):
        for bad in ("fixed:banana", "fixed:", "bogus", "blockguess:x", "blockguess:0",
                    "intercept:1.5", "breidbart:1", "keyguess:2"):
            with pytest.raises(ValueError):
                AttackStrategy.parse(bad)

    def test_fixed_basis_angle_normalized(self):
        assert 0.0 <= AttackStrategy.parse("fixed:3.0").phi < PI / 2


class TestInterceptResend:
    def test_quarter_error_rates(self):
        report = attack_intercept_resend(lfsr_config(), np.random.default_rng(1))
        sigma = math.sqrt(0.25 * 0.75 / 10 ** 5)
        assert abs(report.eve_bit_error.estimate - 0.25) < 4 * sigma
        assert abs(report.induced_qber.estimate - 0.25) < 4 * sigma
        assert report.eve_bit_error_analytic == 0.25

    def test_partial_interception_scales_linearly(self):
        report = attack_intercept_resend(lfsr_config(), np.random.default_rng(2), fraction=0.1)
        sigma = math.sqrt(0.025 * 0.975 / 10 ** 5)
        assert abs(report.induced_qber.estimate - 0.025) < 4 * sigma
        assert report.induced_qber_analytic == 0.025

    def test_no_interception_no_errors(self):
        report = attack_intercept_resend(lfsr_config(n=10 ** 4), np.random.default_rng(3), fraction=0.0)
        assert report.induced_qber.estimate == 0.0

    def test_requires_two_basis_alphabet(self):
        with pytest.raises(ValueError):
            attack_intercept_resend(lfsr_config(m=4), np.random.default_rng(0))


class TestFixedBasis:
    def test_bisecting_basis_error(self):
        report = attack_fixed_basis(lfsr_config(n=2 * 10 ** 5), PI / 8, np.random.default_rng(4))
        sigma = math.sqrt(BREIDBART_ERROR * (1 - BREIDBART_ERROR) / (2 * 10 ** 5))
        assert abs(report.eve_bit_error.estimate - BREIDBART_ERROR) < 4 * sigma
        assert abs(report.eve_bit_error_analytic - BREIDBART_ERROR) < 1e-12

    def test_aligned_basis_error(self):
        report = attack_fixed_basis(lfsr_config(n=2 * 10 ** 5), 0.0, np.random.default_rng(5))
        sigma = math.sqrt(0.25 * 0.75 / (2 * 10 ** 5))
        assert abs(report.eve_bit_error.estimate - 0.25) < 4 * sigma

    def test_induced_qber_matches_brute_force_average(self):
        # Oracle: enumerate (basis, bit, outcome) cases and average the
        # projection products directly.
        for m, phi in [(2, PI / 8), (2, 0.0), (4, 0.3), (8, 0.11)]:
            alphabet = BasisAlphabet(m)
            total = 0.0
            for j in range(m):
                theta_j = j * (PI / 2) / m
                for bit in (0, 1):
                    theta = theta_j + bit * (PI / 2)
                    for outcome in (0, 1):
                        p_outcome = math.cos(theta - phi) ** 2 if outcome == 0 else math.sin(theta - phi) ** 2
                        resent = phi + outcome * (PI / 2)
                        p_wrong = math.cos(resent - (theta_j + (1 - bit) * PI / 2)) ** 2
                        total += p_outcome * p_wrong
            oracle = total / (2 * m)
            assert abs(fixed_basis_induced_qber(MeasBasis(phi), alphabet) - oracle) < 1e-12

    def test_bisecting_basis_induces_quarter_qber(self):
        report = attack_fixed_basis(lfsr_config(n=2 * 10 ** 5), PI / 8, np.random.default_rng(6))
        sigma = math.sqrt(0.25 * 0.75 / (2 * 10 ** 5))
        assert abs(report.induced_qber.estimate - 0.25) < 4 * sigma
        assert abs(report.induced_qber_analytic - 0.25) < 1e-12

    @pytest.mark.parametrize("phi,m", [(0.2, 2), (0.5, 2), (0.15, 4)])
    def test_mc_matches_key_granted_functional(self, phi, m):
        config = lfsr_config(n=2 * 10 ** 5, m=m)
        report = attack_fixed_basis(config, phi, np.random.default_rng(7))
        expected = eve_error_key_granted(MeasBasis(phi), config.alphabet)
        sigma = math.sqrt(expected * (1 - expected) / (2 * 10 ** 5))
        assert abs(report.eve_bit_error.estimate - expected) < 4 * sigma
        induced = fixed_basis_induced_qber(MeasBasis(phi), config.alphabet)
        sigma_q = math.sqrt(induced * (1 - induced) / (2 * 10 ** 5))
        assert abs(report.induced_qber.estimate - induced) < 4 * sigma_q


class TestKeyGuess:
    def test_success_rate_at_eight_bits(self):
        config = lfsr_config(n=64)
        report = attack_key_guess(config, np.random.default_rng(8), trials=10 ** 6)
        expected = 2.0 ** -8
        assert report.success_analytic == expected
        sigma = math.sqrt(expected * (1 - expected) / 10 ** 6)
        assert abs(report.success_mc.estimate - expected) < 4 * sigma
        assert report.info_fraction == 1.0

    def test_two_bit_seed_success_rate(self):
        config = lfsr_config(n=32, seed_text="10", taps="2:2,1")
        report = attack_key_guess(config, np.random.default_rng(9), trials=10 ** 5)
        sigma = math.sqrt(0.25 * 0.75 / 10 ** 5)
        assert abs(report.success_mc.estimate - 0.25) < 4 * sigma

    def test_correct_guess_is_invisible(self):
        config = lfsr_config(n=4096)
        success, eve_err, induced = key_guess_round(
            config, config.keystream.seed, np.random.default_rng(10))
        assert success and eve_err == 0.0 and induced == 0.0

    def test_wrong_guess_leaves_errors(self):
        config = lfsr_config(n=4096)
        wrong = SeedKey.from_string("01101011")
        success, eve_err, induced = key_guess_round(config, wrong, np.random.default_rng(11))
        assert not success and eve_err > 0.1 and induced > 0.1

    def test_requires_lfsr_keystream(self):
        with pytest.raises(ValueError):
            attack_key_guess(repetition_config(40, "10011010"), np.random.default_rng(0))


class TestBlockGuess:
    def test_analytic_reference_point(self):
        report = attack_block_guess(1000, 100, 15, np.random.default_rng(12), trials=8)
        assert abs(report.success_analytic - 2 ** -15) < 1e-9
        assert abs(report.success_analytic - 3.0517578125e-5) < 1e-9
        assert abs(report.info_fraction - 0.15) < 1e-12

    def test_scaled_monte_carlo(self):
        report = attack_block_guess(40, 8, 3, np.random.default_rng(13), trials=10 ** 5)
        sigma = math.sqrt(0.125 * 0.875 / 10 ** 5)
        assert abs(report.success_mc.estimate - 0.125) < 4 * sigma

    def test_single_block_is_coin_flip(self):
        report = attack_block_guess(40, 8, 1, np.random.default_rng(14), trials=10 ** 4)
        sigma = math.sqrt(0.25 / 10 ** 4)
        assert report.success_analytic == 0.5
        assert abs(report.success_mc.estimate - 0.5) < 4 * sigma

    def test_success_trials_are_error_free(self):
        record = block_guess_trials(40, 8, 3, np.random.default_rng(15), trials=2 * 10 ** 4)
        successes = record.success
        assert successes.any()
        assert not record.attacked_errors[successes].any()
        assert not record.eve_errors[successes].any()

    def test_failed_trials_average_quarter_qber_on_attacked_region(self):
        record = block_guess_trials(40, 8, 3, np.random.default_rng(16), trials=2 * 10 ** 4)
        # Unconditionally each attacked position errs with probability
        # P(block guessed wrong) * 1/2 = 1/4; wrong blocks err at 1/2 within.
        total = record.attacked_errors.sum() / (record.attacked_per_trial * record.success.size)
        sigma = math.sqrt(0.25 * 0.75 / (record.attacked_per_trial * record.success.size))
        assert abs(total - 0.25) < 6 * sigma  # positions within a trial correlate by block

    def test_rejects_bad_block_counts(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            attack_block_guess(40, 8, 0, rng)
        with pytest.raises(ValueError):
            attack_block_guess(40, 8, 9, rng)
        with pytest.raises(ValueError):
            attack_block_guess(41, 8, 2, rng)


class TestCiphertextOnlyState:
    @pytest.mark.parametrize("m", [2, 4, 16])
    def test_uniform_data_erases_key_dependence(self, m):
        alphabet = BasisAlphabet(m)
        rng = np.random.default_rng(17)
        config = lfsr_config(n=64, m=m)
        running_key = config.keystream.running_key(64, alphabet)
        identity_half = np.eye(2) / 2
        for rho in ciphertext_only_state(running_key, alphabet):
            assert np.abs(rho.entries - identity_half).max() < 1e-12

    def test_biased_data_leaks(self):
        config = lfsr_config(n=8)
        running_key = config.keystream.running_key(8, config.alphabet)
        states = ciphertext_only_state(running_key, config.alphabet, p_zero=0.7)
        selector0 = int(running_key.selectors[0])
        theta = config.alphabet.basis_angle(selector0)
        if theta == 0.0:
            assert np.allclose(states[0].entries, [[0.7, 0], [0, 0.3]], atol=1e-12)
        assert any(np.abs(rho.entries - np.eye(2) / 2).max() > 0.1 for rho in states)

    def test_rejects_bad_prior(self):
        config = lfsr_config(n=4)
        running_key = config.keystream.running_key(4, config.alphabet)
        with pytest.raises(ValueError):
            ciphertext_only_state(running_key, config.alphabet, p_zero=1.2)


class TestInlineInterference:
    def test_full_interception_trips_the_rate_gate(self):
        from keyedqkd import measure_resend_interference, run_protocol
        config = lfsr_config(n=2 * 10 ** 4, seed_text="1011001110001111", taps="16:16,12,3,1")
        evil = measure_resend_interference(AttackStrategy.parse("breidbart"))
        outcome = run_protocol(config, np.random.default_rng(20), interference=evil)
        assert outcome.abort_reason == "rate_gate"
        assert outcome.qber_raw > 0.2

    def test_light_interception_is_priced_into_the_estimate(self):
        from keyedqkd import measure_resend_interference, run_protocol
        config = lfsr_config(n=2 * 10 ** 4, seed_text="1011001110001111", taps="16:16,12,3,1")
        light = measure_resend_interference(AttackStrategy.parse("intercept:0.1"))
        outcome = run_protocol(config, np.random.default_rng(21), interference=light)
        assert outcome.verified
        assert 0.01 < outcome.qber_raw < 0.06

    def test_key_targeting_strategies_cannot_interfere_inline(self):
        from keyedqkd import measure_resend_interference
        with pytest.raises(ValueError):
            measure_resend_interference(AttackStrategy.parse("keyguess"))
        with pytest.raises(ValueError):
            measure_resend_interference(AttackStrategy.parse("blockguess:3"))

    def test_interference_matches_standalone_attack_statistics(self):
        # The same strategy through the in-line hook and through the
        # dedicated attack round must induce the same error rate.
        from keyedqkd import measure_resend_interference, transmit_round
        config = lfsr_config(n=10 ** 5)
        hook = measure_resend_interference(AttackStrategy.parse("breidbart"))
        alice, bob, _ = transmit_round(config, np.random.default_rng(22), hook)
        qber = float(np.mean(alice != bob))
        sigma = math.sqrt(0.25 * 0.75 / 10 ** 5)
        assert abs(qber - 0.25) < 4 * sigma


class TestRunAttackDispatch:
    def test_block_guess_needs_repetition_keystream(self):
        with pytest.raises(ValueError):
            run_attack(AttackStrategy.parse("blockguess:2"), lfsr_config(n=40),
                       np.random.default_rng(0))

    def test_key_guess_needs_lfsr_keystream(self):
        with pytest.raises(ValueError):
            run_attack(AttackStrategy.parse("keyguess"), repetition_config(40, "1001"),
                       np.random.default_rng(0))

    def test_block_guess_from_config(self):
        report = run_attack(AttackStrategy.parse("blockguess:3"),
                            repetition_config(40, "10011010"),
                            np.random.default_rng(1), trials=2000)
        assert report.success_analytic == 0.125

    def test_deterministic_and_thread_invariant(self):
        config = repetition_config(40, "10011010")
        strategy = AttackStrategy.parse("blockguess:3")
        a = run_attack(strategy, config, np.random.default_rng(5), trials=20000, threads=1)
        b = run_attack(strategy, config, np.random.default_rng(5), trials=20000, threads=8)
        assert a == b
