"""Keyed-basis protocol pipeline: transmission, rate gate, reconciliation,
privacy amplification, key verification, key accounting, and the
direct-encryption mode.

Every detected qubit yields a bit (there is no sifting: the receiver always
measures in the keyed basis), so raw frames are as long as the detected
position list. A run is fully deterministic given (config, rng seed). Aborts
are outcomes, not exceptions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import fftconvolve

from .analysis import CONSERVATIVE_EVE_ERROR, h2
from .keystream import LfsrGenerator, LfsrKeystream, LfsrSpec, RepetitionKeystream, SeedKey
from .qubits import HALF_PI, BasisAlphabet, measure_many, optimal_fixed_basis

# Idealized Shannon-limit reconciliation succeeds when the empirical error
# entropy stays this far below the code redundancy 1 - R. Chosen so finite-n
# fluctuation at n >= 1e4 rarely crosses the gate.
RECONCILE_MARGIN = 0.02

# Fraction of detected bits disclosed for channel estimation and discarded.
QBER_SAMPLE_FRACTION = 0.05

# Direct Toeplitz multiply below this work bound, exact-rounded FFT above it.
_DIRECT_CONV_WORK = 1 << 22

MODE_KEY_GENERATION = "key-generation"
MODE_DIRECT_ENCRYPTION = "direct-encryption"


@dataclass(frozen=True)
class ChannelModel:
    """Per-qubit erasure followed by bit flip (state rotation by pi/2)."""

    flip_prob: float = 0.0
    loss: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.flip_prob < 0.5:
            raise ValueError(f"flip probability must lie in [0, 0.5), got {self.flip_prob}")
        if not 0.0 <= self.loss < 1.0:
            raise ValueError(f"loss must lie in [0, 1), got {self.loss}")


@dataclass(frozen=True)
class ProtocolConfig:
    """Full description of one protocol run."""

    n: int
    alphabet: BasisAlphabet
    keystream: LfsrKeystream | RepetitionKeystream
    channel: ChannelModel
    code_rate: float
    pa_security_param: int
    verification_len: int
    mode: str = MODE_KEY_GENERATION

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("qubit count must be >= 1")
        if not 0.0 < self.code_rate < 1.0:
            raise ValueError(f"code rate must lie in (0, 1), got {self.code_rate}")
        if self.pa_security_param < 0:
            raise ValueError("security parameter must be >= 0")
        if not 1 <= self.verification_len <= MAX_VERIFICATION_LEN:
            raise ValueError(f"verification length must lie in [1, {MAX_VERIFICATION_LEN}]")
        if self.mode not in (MODE_KEY_GENERATION, MODE_DIRECT_ENCRYPTION):
            raise ValueError(f"unknown mode {self.mode!r}")
        if isinstance(self.keystream, RepetitionKeystream) and self.alphabet.m != 2:
            raise ValueError("repetition keystream requires the two-basis alphabet")

    def to_json_dict(self) -> dict:
        if isinstance(self.keystream, LfsrKeystream):
            ks = {"kind": "lfsr", "spec": self.keystream.spec.to_text(),
                  "seed": self.keystream.seed.to_string()}
        else:
            ks = {"kind": "repetition", "key": self.keystream.key.to_string()}
        return {
            "n": self.n,
            "m": self.alphabet.m,
            "keystream": ks,
            "channel": {"flip_prob": self.channel.flip_prob, "loss": self.channel.loss},
            "code_rate": self.code_rate,
            "pa_security_param": self.pa_security_param,
            "verification_len": self.verification_len,
            "mode": self.mode,
        }

    _JSON_FIELDS = frozenset({"n", "m", "keystream", "channel", "code_rate",
                              "pa_security_param", "verification_len", "mode"})

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ProtocolConfig":
        unknown = set(doc) - cls._JSON_FIELDS
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        try:
            ks_doc = doc["keystream"]
            kind = ks_doc["kind"]
            if kind == "lfsr":
                keystream = LfsrKeystream(LfsrSpec.from_text(ks_doc["spec"]),
                                          SeedKey.from_string(ks_doc["seed"]))
            elif kind == "repetition":
                keystream = RepetitionKeystream(SeedKey.from_string(ks_doc["key"]))
            else:
                raise ValueError(f"unknown keystream kind {kind!r}")
            return cls(
                n=int(doc["n"]),
                alphabet=BasisAlphabet(int(doc["m"])),
                keystream=keystream,
                channel=ChannelModel(float(doc["channel"]["flip_prob"]),
                                     float(doc["channel"]["loss"])),
                code_rate=float(doc["code_rate"]),
                pa_security_param=int(doc["pa_security_param"]),
                verification_len=int(doc["verification_len"]),
                mode=str(doc.get("mode", MODE_KEY_GENERATION)),
            )
        except KeyError as exc:
            raise ValueError(f"config document is missing field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ProtocolConfig":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class KeyLedger:
    """Secret-key accounting for one run; net may be negative."""

    consumed_seed: int
    consumed_verification: int
    generated: int

    @property
    def net(self) -> int:
        return self.generated - (self.consumed_seed + self.consumed_verification)

    def to_json_dict(self) -> dict:
        return {
            "consumed_seed": self.consumed_seed,
            "consumed_verification": self.consumed_verification,
            "generated": self.generated,
            "net": self.net,
        }


def bits_to_hex(bits: np.ndarray) -> str:
    """Hex rendering of a bit vector, big-endian, right-padded to a nibble."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        return ""
    pad = (-bits.size) % 4
    padded = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    nibbles = padded.reshape(-1, 4) @ np.array([8, 4, 2, 1], dtype=np.uint8)
    return "".join("0123456789abcdef"[v] for v in nibbles)


@dataclass(frozen=True)
class ProtocolOutcome:
    """Result of one run: final keys, observed error rate, ledger, verdict."""

    alice_key: np.ndarray
    bob_key: np.ndarray
    qber_raw: float | None
    detected_positions: np.ndarray
    verified: bool
    ledger: KeyLedger
    abort_reason: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "verified": self.verified,
            "abort_reason": self.abort_reason,
            "qber_raw": self.qber_raw,
            "detected_count": int(self.detected_positions.size),
            "key_bits": int(self.alice_key.size),
            "alice_key": bits_to_hex(self.alice_key),
            "bob_key": bits_to_hex(self.bob_key),
            "ledger": self.ledger.to_json_dict(),
        }


def transmit_round(config: ProtocolConfig, rng: np.random.Generator, interference=None):
    """One keyed transmission: returns (alice bits, bob bits, detected positions).

    The sender draws n uniform bits and encodes each in the basis selected by
    the shared running key; the channel erases then flips; the receiver
    measures in the same keyed basis and decodes the outcome directly.

    `interference`, if given, is a callable (state_angles, rng) -> state_angles
    applied between the sender and the channel: the hook an eavesdropper uses
    to measure and resend in-line with a full run.
    """
    n = config.n
    m = config.alphabet.m
    selectors = config.keystream.running_key(n, config.alphabet).selectors
    alice = rng.integers(0, 2, size=n, dtype=np.int64).astype(np.uint8)
    phi = selectors * (HALF_PI / m)
    theta = phi + alice * HALF_PI
    if interference is not None:
        theta = np.asarray(interference(theta, rng), dtype=float)
        if theta.shape != phi.shape:
            raise ValueError("interference must return one state angle per qubit")
    lost = rng.random(n) < config.channel.loss
    flipped = rng.random(n) < config.channel.flip_prob
    bob = measure_many(theta + flipped * HALF_PI, phi, rng)
    detected = np.nonzero(~lost)[0]
    return alice[detected], bob[detected], detected


class RateVerdict(str, Enum):
    OK = "ok"
    RATE_TOO_HIGH = "rate_too_high"
    RATE_TOO_LOW_FOR_SECURITY = "rate_too_low_for_security"


def rate_gate(p_c_hat: float, code_rate: float) -> RateVerdict:
    """Feasibility of code rate R against the estimated channel error.

    ok requires 1 - h2(p_c_hat) > R (users can correct) and
    R > 1 - h2(0.15) (rate exceeds a fixed-basis eavesdropper's capacity).
    When both fail, the correction failure is reported.
    """
    if not 0.0 <= p_c_hat < 0.5:
        raise ValueError(f"error estimate must lie in [0, 0.5), got {p_c_hat}")
    if 1.0 - h2(p_c_hat) <= code_rate:
        return RateVerdict.RATE_TOO_HIGH
    if code_rate <= 1.0 - h2(CONSERVATIVE_EVE_ERROR):
        return RateVerdict.RATE_TOO_LOW_FOR_SECURITY
    return RateVerdict.OK


def reconcile(alice_bits, bob_bits, code_rate: float, rng=None):
    """Idealized Shannon-limit reconciliation.

    Succeeds iff h2(empirical error rate) <= (1 - R) - margin; on success the
    receiver's bits are replaced by the sender's and ceil(l*(1-R)) bits count
    as leaked syndrome. The decoder itself is deterministic; rng is accepted
    for interface parity and unused.
    """
    alice = np.asarray(alice_bits, dtype=np.uint8)
    bob = np.asarray(bob_bits, dtype=np.uint8)
    if alice.shape != bob.shape:
        raise ValueError(f"length mismatch: {alice.size} vs {bob.size}")
    length = alice.size
    error_rate = float(np.mean(alice != bob)) if length else 0.0
    leaked = math.ceil(length * (1.0 - code_rate))
    if h2(error_rate) > (1.0 - code_rate) - RECONCILE_MARGIN:
        return bob.copy(), leaked, False
    return alice.copy(), leaked, True


def privacy_amplify(bits, out_len: int, hash_seed) -> np.ndarray:
    """Toeplitz-matrix binary hash of `bits` down to `out_len` bits.

    The matrix is T[i, j] = seed[i - j + (len(bits) - 1)], so the seed runs
    along the diagonals and must have length len(bits) + out_len - 1. Linear
    over GF(2) in the input for a fixed seed.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    seed = np.asarray(hash_seed, dtype=np.uint8)
    n = bits.size
    if not 0 <= out_len <= n:
        raise ValueError(f"output length must lie in [0, {n}], got {out_len}")
    if seed.size != max(0, n + out_len - 1):
        raise ValueError(f"hash seed must have {max(0, n + out_len - 1)} bits, got {seed.size}")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    if n == 0:
        return np.zeros(out_len, dtype=np.uint8)
    if n * out_len <= _DIRECT_CONV_WORK:
        conv = np.convolve(seed.astype(np.int64), bits.astype(np.int64))
        seg = conv[n - 1:n - 1 + out_len]
    else:
        conv = fftconvolve(seed.astype(np.float64), bits.astype(np.float64))
        seg = np.round(conv[n - 1:n - 1 + out_len])
        if np.abs(conv[n - 1:n - 1 + out_len] - seg).max() > 0.25:
            raise ArithmeticError("FFT convolution lost integer exactness")
        seg = seg.astype(np.int64)
    return (seg % 2).astype(np.uint8)


def pa_output_length(reconciled_len: int, code_rate: float, alphabet: BasisAlphabet,
                     security_bits: int) -> int:
    """Privacy-amplified key length: floor(l * (R - eve capacity)) - s, clamped at 0.

    The margin subtracts the best fixed-basis eavesdropper capacity
    1 - h2(e*) from the code rate, so reconciliation side information is
    covered by the rate condition itself; s is an extra security haircut.
    """
    if reconciled_len < 0:
        raise ValueError("reconciled length must be >= 0")
    if security_bits < 0:
        raise ValueError("security parameter must be >= 0")
    _, err = optimal_fixed_basis(alphabet)
    margin = code_rate - (1.0 - h2(err))
    return max(0, math.floor(reconciled_len * margin) - security_bits)


# Primitive tap sets for the verification-hash expander, one per register
# length; each entry is order-checked against the factorization of 2^k - 1.
_VERIFICATION_TAPS = {
    2: (2, 1), 3: (3, 1), 4: (4, 1), 5: (5, 2), 6: (6, 1), 7: (7, 1),
    8: (8, 7, 2, 1), 9: (9, 4), 10: (10, 3), 11: (11, 2), 12: (12, 8, 2, 1),
    13: (13, 5, 2, 1), 14: (14, 12, 2, 1), 15: (15, 1), 16: (16, 12, 3, 1),
    17: (17, 3), 18: (18, 7), 19: (19, 5, 2, 1), 20: (20, 3), 21: (21, 2),
    22: (22, 1), 23: (23, 5), 24: (24, 7, 2, 1), 25: (25, 3),
    26: (26, 6, 2, 1), 27: (27, 5, 2, 1), 28: (28, 3), 29: (29, 2),
    30: (30, 23, 2, 1), 31: (31, 3), 32: (32, 22, 2, 1), 33: (33, 13),
    34: (34, 27, 2, 1), 35: (35, 2), 36: (36, 11), 37: (37, 9, 2, 1),
    38: (38, 13, 3, 1), 39: (39, 4), 40: (40, 35, 2, 1), 41: (41, 3),
    42: (42, 29, 2, 1), 43: (43, 12, 2, 1), 44: (44, 38, 3, 1),
    45: (45, 4, 3, 1), 46: (46, 9, 3, 1), 47: (47, 5), 48: (48, 28, 3, 1),
    49: (49, 9), 50: (50, 16, 2, 1), 51: (51, 28, 2, 1), 52: (52, 3),
    53: (53, 6, 2, 1), 54: (54, 17, 2, 1), 55: (55, 24), 56: (56, 42, 2, 1),
    57: (57, 7), 58: (58, 19), 59: (59, 24, 2, 1), 60: (60, 1),
    61: (61, 5, 2, 1), 62: (62, 28, 3, 1), 63: (63, 1), 64: (64, 11, 2, 1),
}

MAX_VERIFICATION_LEN = max(_VERIFICATION_TAPS)


def verification_tag(key_bits, selector) -> np.ndarray:
    """Keyed hash for key verification.

    The |selector|-bit selector seeds a maximal-length register whose output
    becomes the diagonal seed of a Toeplitz hash (the privacy-amplification
    primitive with a short key). A maximal sequence never shows |selector|
    consecutive zeros, so for a random selector any single-bit difference in
    the hashed keys collides only on the all-zero selector, i.e. with
    probability 2^-|selector|; random unequal keys collide at the same order.
    """
    selector = np.asarray(selector, dtype=np.uint8)
    key_bits = np.asarray(key_bits, dtype=np.uint8)
    kv = selector.size
    if kv < 1:
        raise ValueError("selector must be nonempty")
    seed_len = max(0, key_bits.size + kv - 1)
    if not selector.any():
        seed = np.zeros(seed_len, dtype=np.uint8)
    elif kv == 1:
        seed = np.ones(seed_len, dtype=np.uint8)
    else:
        taps = _VERIFICATION_TAPS.get(kv)
        if taps is None:
            raise ValueError(f"verification hash supports |K_v| <= {MAX_VERIFICATION_LEN}, got {kv}")
        gen = LfsrGenerator(LfsrSpec(taps), SeedKey(tuple(int(b) for b in selector)))
        seed = gen.take(seed_len)
    return privacy_amplify(key_bits, kv, seed)


def verify_key(alice_key, bob_key, verification_key) -> bool:
    """Compare keyed hashes of the two final keys, one-time padded for exchange.

    The verification key splits in half: |K_v| bits select the hash, |K_v|
    bits pad the transmitted digest. Unequal keys are accepted with
    probability about 2^-|K_v|.
    """
    vk = np.asarray(verification_key, dtype=np.uint8)
    if vk.size < 2 or vk.size % 2:
        raise ValueError("verification key must be 2*|K_v| bits (selector + pad)")
    kv = vk.size // 2
    selector, pad = vk[:kv], vk[kv:]
    tag_a = verification_tag(alice_key, selector) ^ pad
    tag_b = verification_tag(bob_key, selector) ^ pad
    return bool(np.array_equal(tag_a, tag_b))


def run_protocol(config: ProtocolConfig, rng: np.random.Generator,
                 interference=None) -> ProtocolOutcome:
    """Full key-generation run: transmit, estimate, gate, reconcile, amplify, verify.

    Channel estimation discloses a random 5% subsample of detected bits, which
    is discarded from the key material. The privacy-amplification seed and the
    estimation subsample are public coins: only the seed key and the 2*|K_v|
    verification bits count as consumed secret key. Aborts before the
    verification step consume no verification bits.

    An `interference` callable (see transmit_round) runs the pipeline against
    an in-line eavesdropper; errors she induces surface in the estimate and
    close the rate gate like any other channel noise.
    """
    if config.mode != MODE_KEY_GENERATION:
        raise ValueError("run_protocol requires a key-generation config")
    consumed_seed = config.keystream.secret_bits
    kv = config.verification_len
    empty = np.zeros(0, dtype=np.uint8)

    def aborted(reason, detected, qber=None, consumed_verification=0):
        return ProtocolOutcome(
            alice_key=empty, bob_key=empty, qber_raw=qber,
            detected_positions=detected, verified=False,
            ledger=KeyLedger(consumed_seed, consumed_verification, 0),
            abort_reason=reason,
        )

    alice, bob, detected = transmit_round(config, rng, interference)
    if detected.size == 0:
        return aborted("no_detected", detected)

    sample_size = max(1, round(QBER_SAMPLE_FRACTION * detected.size))
    sample = rng.choice(detected.size, size=sample_size, replace=False)
    sample_mask = np.zeros(detected.size, dtype=bool)
    sample_mask[sample] = True
    qber_hat = float(np.mean(alice[sample_mask] != bob[sample_mask]))

    # Estimates at or beyond 1/2 are hopeless; clamp into the gate's domain.
    if rate_gate(min(qber_hat, 0.5 - 1e-9), config.code_rate) is not RateVerdict.OK:
        return aborted("rate_gate", detected, qber_hat)

    alice_kept = alice[~sample_mask]
    bob_kept = bob[~sample_mask]
    bob_corrected, _, reconciled = reconcile(alice_kept, bob_kept, config.code_rate)
    if not reconciled:
        return aborted("reconcile", detected, qber_hat)

    out_len = pa_output_length(alice_kept.size, config.code_rate, config.alphabet,
                               config.pa_security_param)
    pa_seed = rng.integers(0, 2, size=max(0, alice_kept.size + out_len - 1), dtype=np.int64)
    key_a = privacy_amplify(alice_kept, out_len, pa_seed)
    key_b = privacy_amplify(bob_corrected, out_len, pa_seed)

    verification_key = rng.integers(0, 2, size=2 * kv, dtype=np.int64)
    verified = verify_key(key_a, key_b, verification_key)
    return ProtocolOutcome(
        alice_key=key_a, bob_key=key_b, qber_raw=qber_hat,
        detected_positions=detected, verified=verified,
        ledger=KeyLedger(consumed_seed, 2 * kv, key_a.size if verified else 0),
        abort_reason=None if verified else "verification",
    )


@dataclass(frozen=True)
class DirectEncryptionResult:
    """Transcript of one direct-encryption exchange."""

    ciphertext_angles: np.ndarray
    recovered_plaintext: np.ndarray | None
    ok: bool
    reason: str | None = None


def run_direct_encryption(config: ProtocolConfig, plaintext,
                          rng: np.random.Generator) -> DirectEncryptionResult:
    """Send data directly over the keyed-basis channel: rate-R coding, no
    privacy amplification, message authentication instead of verification.

    The frame is plaintext plus ceil(n*(1-R)) idealized parity bits (random
    placeholders; the code itself is the Shannon-limit gate from reconcile).
    Erased positions enter the receiver's frame as zeros, i.e. as errors. The
    ciphertext transcript records the transmitted state angles; that is
    simulator bookkeeping, not information an attacker could read out.
    """
    if config.mode != MODE_DIRECT_ENCRYPTION:
        raise ValueError("run_direct_encryption requires a direct-encryption config")
    pt = np.asarray(plaintext, dtype=np.uint8)
    n = config.n
    data_capacity = math.floor(n * config.code_rate)
    if pt.size > data_capacity:
        raise ValueError(f"plaintext of {pt.size} bits exceeds rate-R payload {data_capacity}")

    filler = rng.integers(0, 2, size=data_capacity - pt.size, dtype=np.int64).astype(np.uint8)
    parity = rng.integers(0, 2, size=n - data_capacity, dtype=np.int64).astype(np.uint8)
    frame = np.concatenate([pt, filler, parity])

    m = config.alphabet.m
    selectors = config.keystream.running_key(n, config.alphabet).selectors
    phi = selectors * (HALF_PI / m)
    theta = phi + frame * HALF_PI
    lost = rng.random(n) < config.channel.loss
    flipped = rng.random(n) < config.channel.flip_prob
    bob_frame = measure_many(theta + flipped * HALF_PI, phi, rng)
    bob_frame[lost] = 0

    corrected, _, reconciled = reconcile(frame, bob_frame, config.code_rate)
    if not reconciled:
        return DirectEncryptionResult(theta, None, False, "reconcile")

    recovered = corrected[:pt.size]
    auth_key = rng.integers(0, 2, size=2 * config.verification_len, dtype=np.int64)
    if not verify_key(pt, recovered, auth_key):
        return DirectEncryptionResult(theta, recovered, False, "authentication")
    return DirectEncryptionResult(theta, recovered, True)
