"""Eavesdropper strategies with analytic and Monte Carlo statistics.

Active attacks are measure-resend: the attacker measures the transmitted
state and forwards her projected state, which then crosses the users' channel.
Passive bounds elsewhere grant her a perfect copy, so measure-resend covers
every strategy quantified here. Strategy evaluation is deterministic given
(config, rng seed); Monte Carlo trials run in fixed-size chunks whose
sub-seeds derive from the caller's generator, so results are independent of
the worker-thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import ConfidenceInterval, binomial_ci
from .keystream import (
    LfsrGenerator,
    LfsrKeystream,
    RepetitionKeystream,
    RunningKey,
    SeedKey,
    expand_running_key,
)
from .protocol import ChannelModel, ProtocolConfig
from .qubits import (
    HALF_PI,
    BasisAlphabet,
    DensityMatrix,
    MeasBasis,
    StateAngle,
    density_of_mixture,
    eve_error_key_granted,
    measure_many,
)

BREIDBART_ANGLE = math.pi / 8

# Monte Carlo trials are processed in chunks of this size; each chunk draws
# its own child generator so thread scheduling cannot reorder randomness.
TRIAL_CHUNK = 4096

# Transmission simulations are capped when a strategy's success statistic
# needs far more trials than its error statistics do.
MAX_QUBIT_TRIALS = 16


@dataclass(frozen=True)
class AttackStrategy:
    """Parsed attack selection.

    kinds: intercept_resend_random (optional attacked fraction),
    fixed_basis (basis angle), key_guess, block_guess (k_blocks).
    """

    kind: str
    phi: float | None = None
    k_blocks: int | None = None
    fraction: float = 1.0

    def __post_init__(self):
        if self.kind == "fixed_basis":
            if self.phi is None:
                raise ValueError("fixed_basis needs a basis angle")
            object.__setattr__(self, "phi", MeasBasis(self.phi).phi)
        elif self.kind == "block_guess":
            if self.k_blocks is None or self.k_blocks < 1:
                raise ValueError("block_guess needs k_blocks >= 1")
        elif self.kind == "intercept_resend_random":
            if not 0.0 <= self.fraction <= 1.0:
                raise ValueError(f"attacked fraction must lie in [0, 1], got {self.fraction}")
        elif self.kind != "key_guess":
            raise ValueError(f"unknown attack kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "AttackStrategy":
        """Grammar: "intercept[:f]", "fixed:<phi>", "breidbart", "keyguess", "blockguess:<k>"."""
        name, _, arg = text.partition(":")

        def number(convert):
            try:
                return convert(arg)
            except ValueError:
                raise ValueError(f"bad parameter {arg!r} in strategy {text!r}") from None

        if name == "intercept":
            return cls("intercept_resend_random", fraction=number(float) if arg else 1.0)
        if name == "fixed":
            return cls("fixed_basis", phi=number(float))
        if name == "breidbart" and not arg:
            return cls("fixed_basis", phi=BREIDBART_ANGLE)
        if name == "keyguess" and not arg:
            return cls("key_guess")
        if name == "blockguess":
            return cls("block_guess", k_blocks=number(int))
        raise ValueError(f"unknown strategy {text!r}")


@dataclass(frozen=True)
class AttackReport:
    """Per-strategy statistics; confidence half-widths are four standard errors."""

    strategy: str
    trials: int
    qubits: int
    eve_bit_error: ConfidenceInterval | None = None
    induced_qber: ConfidenceInterval | None = None
    eve_bit_error_analytic: float | None = None
    induced_qber_analytic: float | None = None
    success_analytic: float | None = None
    success_mc: ConfidenceInterval | None = None
    info_fraction: float | None = None

    def __post_init__(self):
        for ci in (self.eve_bit_error, self.induced_qber, self.success_mc):
            if ci is not None and not 0.0 <= ci.estimate <= 1.0:
                raise ValueError("rates must lie in [0, 1]")

    def to_json_dict(self) -> dict:
        def ci(value):
            if value is None:
                return None
            return {"estimate": value.estimate, "half_width": value.half_width}

        return {
            "strategy": self.strategy,
            "trials": self.trials,
            "qubits": self.qubits,
            "eve_bit_error": ci(self.eve_bit_error),
            "eve_bit_error_analytic": self.eve_bit_error_analytic,
            "induced_qber": ci(self.induced_qber),
            "induced_qber_analytic": self.induced_qber_analytic,
            "success_probability": None if self.success_analytic is None and self.success_mc is None
            else {"analytic": self.success_analytic, **(ci(self.success_mc) or {})},
            "info_fraction": self.info_fraction,
        }


def _chunk_rngs(rng: np.random.Generator, trials: int, chunk: int = TRIAL_CHUNK):
    """Split `trials` into chunks with independent child generators.

    Child seeds come from one draw on the caller's generator, so the split is
    deterministic and identical for every thread count.
    """
    sizes = [chunk] * (trials // chunk)
    if trials % chunk:
        sizes.append(trials % chunk)
    seeds = rng.integers(0, 2 ** 63, size=len(sizes))
    return [(size, np.random.default_rng(int(seed))) for size, seed in zip(sizes, seeds)]


def _map_chunks(kernel, chunks, threads: int):
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda c: kernel(*c), chunks))
    return [kernel(*c) for c in chunks]


def _apply_channel_and_receive(theta_fwd, phi_key, channel, rng):
    lost = rng.random(theta_fwd.shape) < channel.loss
    flipped = rng.random(theta_fwd.shape) < channel.flip_prob
    bob = measure_many(theta_fwd + flipped * HALF_PI, phi_key, rng)
    return bob, ~lost


def _resend_round(config: ProtocolConfig, eve_phi, attacked, rng):
    """Common measure-resend round. Returns per-position arrays: selectors,
    alice bits, eve outcomes (on attacked positions), bob bits, detected mask."""
    n = config.n
    m = config.alphabet.m
    selectors = config.keystream.running_key(n, config.alphabet).selectors
    alice = rng.integers(0, 2, size=n, dtype=np.int64).astype(np.uint8)
    phi_key = selectors * (HALF_PI / m)
    theta = phi_key + alice * HALF_PI

    outcome = measure_many(theta[attacked], eve_phi[attacked], rng)
    theta_fwd = theta.copy()
    theta_fwd[attacked] = eve_phi[attacked] + outcome * HALF_PI

    bob, detected = _apply_channel_and_receive(theta_fwd, phi_key, config.channel, rng)
    return selectors, alice, outcome, bob, detected


def attack_intercept_resend(config: ProtocolConfig, rng: np.random.Generator,
                            trials: int = 1, fraction: float = 1.0,
                            threads: int = 1) -> AttackReport:
    """Opaque attack on the two-basis alphabet: the attacker measures each
    attacked qubit in a uniformly random one of the two bases and resends her
    outcome state.

    Her bit error is reported over attacked positions after the selectors are
    granted; the induced user error is reported over all detected positions.
    Analytic fields are the noiseless-channel values: 1/4 for her error and
    fraction/4 for the induced rate.
    """
    if config.alphabet.m != 2:
        raise ValueError("the random-basis opaque attack is defined on the two-basis alphabet")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"attacked fraction must lie in [0, 1], got {fraction}")

    def kernel(count, chunk_rng):
        eve_err = eve_tot = user_err = user_tot = 0
        for _ in range(count):
            attacked = chunk_rng.random(config.n) < fraction
            eve_basis = chunk_rng.integers(0, 2, size=config.n, dtype=np.int64)
            eve_phi = eve_basis * (HALF_PI / 2)
            _, alice, outcome, bob, detected = _resend_round(config, eve_phi, attacked, chunk_rng)
            # With two bases the outcome is already the optimal key-granted
            # decoding: exact on a matched basis, a fair coin otherwise.
            eve_err += int(np.sum(outcome != alice[attacked]))
            eve_tot += int(np.sum(attacked))
            user_err += int(np.sum((bob != alice) & detected))
            user_tot += int(np.sum(detected))
        return eve_err, eve_tot, user_err, user_tot

    parts = _map_chunks(kernel, _chunk_rngs(rng, trials, chunk=1), threads)
    eve_err, eve_tot, user_err, user_tot = (sum(p[i] for p in parts) for i in range(4))
    return AttackReport(
        strategy=f"intercept:{fraction:g}" if fraction != 1.0 else "intercept",
        trials=trials, qubits=config.n,
        eve_bit_error=binomial_ci(eve_err, max(1, eve_tot)),
        induced_qber=binomial_ci(user_err, max(1, user_tot)),
        eve_bit_error_analytic=0.25,
        induced_qber_analytic=0.25 * fraction,
    )


def fixed_basis_induced_qber(basis: MeasBasis, alphabet: BasisAlphabet) -> float:
    """Noiseless user error rate induced by measure-resend in a fixed basis:
    averaging the projection products over bases and bits gives
    (1/(2m)) * sum_j sin^2(2*(theta_j - phi))."""
    deltas = alphabet.angles() - basis.phi
    return float(np.mean(np.sin(2.0 * deltas) ** 2) / 2.0)


def attack_fixed_basis(config: ProtocolConfig, phi: float, rng: np.random.Generator,
                       trials: int = 1, threads: int = 1) -> AttackReport:
    """Measure-resend with one fixed basis for every qubit.

    The attacker stores outcomes, is granted the running key afterwards, and
    decodes each bit by likelihood: keep the outcome when her basis is within
    pi/4 of the keyed basis, flip it otherwise. Her error matches
    eve_error_key_granted(phi, m); the induced user error matches the
    closed-form average reported in the analytic field.
    """
    basis = MeasBasis(phi)
    m = config.alphabet.m

    def kernel(count, chunk_rng):
        eve_err = eve_tot = user_err = user_tot = 0
        for _ in range(count):
            attacked = np.ones(config.n, dtype=bool)
            eve_phi = np.full(config.n, basis.phi)
            selectors, alice, outcome, bob, detected = _resend_round(
                config, eve_phi, attacked, chunk_rng)
            delta = selectors * (HALF_PI / m) - basis.phi
            flip = (np.cos(delta) ** 2) < 0.5
            guess = outcome ^ flip.astype(np.uint8)
            eve_err += int(np.sum(guess != alice))
            eve_tot += config.n
            user_err += int(np.sum((bob != alice) & detected))
            user_tot += int(np.sum(detected))
        return eve_err, eve_tot, user_err, user_tot

    parts = _map_chunks(kernel, _chunk_rngs(rng, trials, chunk=1), threads)
    eve_err, eve_tot, user_err, user_tot = (sum(p[i] for p in parts) for i in range(4))
    return AttackReport(
        strategy=f"fixed:{basis.phi:.9g}",
        trials=trials, qubits=config.n,
        eve_bit_error=binomial_ci(eve_err, max(1, eve_tot)),
        induced_qber=binomial_ci(user_err, max(1, user_tot)),
        eve_bit_error_analytic=eve_error_key_granted(basis, config.alphabet),
        induced_qber_analytic=fixed_basis_induced_qber(basis, config.alphabet),
    )


def key_guess_round(config: ProtocolConfig, guess: SeedKey, rng: np.random.Generator):
    """One transmission attacked under a guessed seed key.

    Returns (success, eve bit-error rate, induced user error rate). The guess
    expands through the same register spec; an all-zero guess expands to the
    all-zero stream (the attacker is free to guess a degenerate seed).
    """
    if not isinstance(config.keystream, LfsrKeystream):
        raise ValueError("the key-guessing attack targets an LFSR keystream")
    actual = config.keystream.seed
    if len(guess) != len(actual):
        raise ValueError("guess length must match the seed length")
    if guess.is_zero:
        guess_selectors = np.zeros(config.n, dtype=np.int64)
    else:
        guess_selectors = expand_running_key(
            LfsrGenerator(config.keystream.spec, guess), config.n, config.alphabet
        ).selectors
    eve_phi = guess_selectors * (HALF_PI / config.alphabet.m)
    attacked = np.ones(config.n, dtype=bool)
    _, alice, outcome, bob, detected = _resend_round(config, eve_phi, attacked, rng)
    eve_error = float(np.mean(outcome != alice))
    detected_total = int(np.sum(detected))
    induced = float(np.sum((bob != alice) & detected) / detected_total) if detected_total else 0.0
    return guess.bits == actual.bits, eve_error, induced


def attack_key_guess(config: ProtocolConfig, rng: np.random.Generator,
                     trials: int = 1, threads: int = 1) -> AttackReport:
    """Uniform seed-key guessing before measurement.

    Success (guess equals the actual seed) is counted over every trial; the
    analytic rate is 2^-|K_s|. Transmission-level error statistics come from a
    capped number of simulated rounds, since the success statistic alone needs
    very large trial counts.
    """
    if not isinstance(config.keystream, LfsrKeystream):
        raise ValueError("the key-guessing attack targets an LFSR keystream")
    seed_bits = np.array(config.keystream.seed.bits, dtype=np.uint8)
    length = seed_bits.size

    def success_kernel(count, chunk_rng):
        guesses = chunk_rng.integers(0, 2, size=(count, length), dtype=np.int64)
        return int(np.sum(np.all(guesses == seed_bits, axis=1)))

    successes = sum(_map_chunks(success_kernel, _chunk_rngs(rng, trials), threads))

    qubit_trials = min(trials, MAX_QUBIT_TRIALS)
    eve_err_sum = induced_sum = 0.0
    for _, chunk_rng in _chunk_rngs(rng, qubit_trials, chunk=1):
        guess = SeedKey(tuple(int(b) for b in chunk_rng.integers(0, 2, size=length)))
        _, eve_err, induced = key_guess_round(config, guess, chunk_rng)
        eve_err_sum += eve_err
        induced_sum += induced
    return AttackReport(
        strategy="keyguess",
        trials=trials, qubits=config.n,
        eve_bit_error=ConfidenceInterval(eve_err_sum / qubit_trials,
                                         4.0 * math.sqrt(0.25 / (qubit_trials * config.n))),
        induced_qber=ConfidenceInterval(induced_sum / qubit_trials,
                                        4.0 * math.sqrt(0.25 / (qubit_trials * config.n))),
        success_analytic=2.0 ** -length,
        success_mc=binomial_ci(successes, trials),
        info_fraction=1.0,
    )


@dataclass(frozen=True)
class BlockGuessTrials:
    """Per-trial records of the block-guessing attack (noiseless unless a
    channel is supplied): success flags plus user and attacker error counts
    on attacked positions."""

    success: np.ndarray
    attacked_errors: np.ndarray
    eve_errors: np.ndarray
    attacked_per_trial: int


def block_guess_trials(n: int, m_k: int, k_blocks: int, rng: np.random.Generator,
                       trials: int = 1, threads: int = 1,
                       channel: ChannelModel | None = None) -> BlockGuessTrials:
    """Simulate the per-block guessing attack on the repetition running key.

    The users' m_k-bit key is drawn fresh each trial; the attacker picks the
    first k_blocks blocks (the choice is irrelevant by symmetry), guesses one
    basis bit per block, and measure-resends the k*n/m_k covered qubits.
    """
    if not 1 <= k_blocks <= m_k:
        raise ValueError(f"k_blocks must lie in [1, {m_k}], got {k_blocks}")
    if n % m_k:
        raise ValueError(f"block arithmetic needs m_k | n, got n={n}, m_k={m_k}")
    channel = channel or ChannelModel()
    block_len = n // m_k
    attacked_len = k_blocks * block_len

    def kernel(count, chunk_rng):
        key_blocks = chunk_rng.integers(0, 2, size=(count, k_blocks), dtype=np.int64)
        guesses = chunk_rng.integers(0, 2, size=(count, k_blocks), dtype=np.int64)
        success = np.all(guesses == key_blocks, axis=1)

        key_phi = np.repeat(key_blocks, block_len, axis=1) * (HALF_PI / 2)
        guess_phi = np.repeat(guesses, block_len, axis=1) * (HALF_PI / 2)
        alice = chunk_rng.integers(0, 2, size=(count, attacked_len), dtype=np.int64).astype(np.uint8)
        theta = key_phi + alice * HALF_PI
        outcome = measure_many(theta, guess_phi, chunk_rng)
        resent = guess_phi + outcome * HALF_PI
        bob, detected = _apply_channel_and_receive(resent, key_phi, channel, chunk_rng)
        errors = np.sum((bob != alice) & detected, axis=1)
        eve_errors = np.sum(outcome != alice, axis=1)
        return success, errors, eve_errors

    parts = _map_chunks(kernel, _chunk_rngs(rng, trials), threads)
    return BlockGuessTrials(
        success=np.concatenate([p[0] for p in parts]),
        attacked_errors=np.concatenate([p[1] for p in parts]),
        eve_errors=np.concatenate([p[2] for p in parts]),
        attacked_per_trial=attacked_len,
    )


def attack_block_guess(n: int, m_k: int, k_blocks: int, rng: np.random.Generator,
                       trials: int = 1, threads: int = 1,
                       channel: ChannelModel | None = None) -> AttackReport:
    """Block-guessing attack statistics.

    Success (all k guesses right) has analytic probability 2^-k; a successful
    trial reads k/m_k of the data with zero induced error on the attacked
    region, while each wrongly guessed block suffers 50% errors, which
    averages to an unconditional 1/4 over attacked positions.
    """
    record = block_guess_trials(n, m_k, k_blocks, rng, trials, threads, channel)
    attacked_total = record.attacked_per_trial * trials
    return AttackReport(
        strategy=f"blockguess:{k_blocks}",
        trials=trials, qubits=n,
        eve_bit_error=binomial_ci(int(record.eve_errors.sum()), attacked_total),
        induced_qber=binomial_ci(int(record.attacked_errors.sum()), attacked_total),
        induced_qber_analytic=0.25,
        success_analytic=2.0 ** -k_blocks,
        success_mc=binomial_ci(int(record.success.sum()), trials),
        info_fraction=k_blocks / m_k,
    )


def ciphertext_only_state(running_key: RunningKey, alphabet: BasisAlphabet,
                          p_zero: float = 0.5) -> list[DensityMatrix]:
    """Per-position ciphertext state averaged over the data distribution.

    With uniform data every position reduces to the maximally mixed state
    regardless of the selector, so the transmitted sequence carries no
    information about the running key. A biased data prior breaks that
    reduction, which is what makes the uniform-data premise load-bearing.
    """
    if not 0.0 <= p_zero <= 1.0:
        raise ValueError(f"data prior must lie in [0, 1], got {p_zero}")
    out = []
    for selector in running_key.selectors:
        theta = alphabet.basis_angle(int(selector))
        out.append(density_of_mixture([
            (p_zero, StateAngle(theta)),
            (1.0 - p_zero, StateAngle(theta + HALF_PI)),
        ]))
    return out


def measure_resend_interference(strategy: AttackStrategy):
    """In-line interference callable for transmit_round/run_protocol.

    Realizes the measure-resend strategies against a live run: the returned
    function measures the transmitted states in the strategy's bases and
    forwards the projected states. Only intercept and fixed-basis strategies
    act on states alone; key-targeting strategies need the run's keystream
    and are evaluated through their dedicated attack functions.
    """
    if strategy.kind not in ("intercept_resend_random", "fixed_basis"):
        raise ValueError(f"{strategy.kind} cannot run as in-line interference")

    def interfere(theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = theta.size
        if strategy.kind == "intercept_resend_random":
            attacked = rng.random(n) < strategy.fraction
            eve_phi = rng.integers(0, 2, size=n, dtype=np.int64) * (HALF_PI / 2)
        else:
            attacked = np.ones(n, dtype=bool)
            eve_phi = np.full(n, strategy.phi)
        outcome = measure_many(theta[attacked], eve_phi[attacked], rng)
        forwarded = theta.copy()
        forwarded[attacked] = eve_phi[attacked] + outcome * HALF_PI
        return forwarded

    return interfere


def run_attack(strategy: AttackStrategy, config: ProtocolConfig, rng: np.random.Generator,
               trials: int = 1, threads: int = 1) -> AttackReport:
    """Dispatch a parsed strategy against a protocol configuration."""
    if strategy.kind == "intercept_resend_random":
        return attack_intercept_resend(config, rng, trials=trials,
                                       fraction=strategy.fraction, threads=threads)
    if strategy.kind == "fixed_basis":
        return attack_fixed_basis(config, strategy.phi, rng, trials=trials, threads=threads)
    if strategy.kind == "key_guess":
        return attack_key_guess(config, rng, trials=trials, threads=threads)
    if strategy.kind == "block_guess":
        if not isinstance(config.keystream, RepetitionKeystream):
            raise ValueError("the block-guessing attack targets a repetition keystream")
        return attack_block_guess(config.n, config.keystream.secret_bits, strategy.k_blocks,
                                  rng, trials=trials, threads=threads, channel=config.channel)
    raise ValueError(f"unknown attack kind {strategy.kind!r}")
