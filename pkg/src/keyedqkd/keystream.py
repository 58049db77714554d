"""Seed-keyed deterministic expansion of a short secret key into a running key
of per-qubit basis selectors.

A bit source is any iterable yielding 0/1 values; sources may additionally
provide ``take(count) -> uint8 array`` for bulk consumption. Two sources are
built in: a Fibonacci-configuration LFSR and the repetition expander that
stretches an m_k-bit key over n qubits in contiguous blocks. Any deterministic
stream (e.g. a standard stream cipher) can be plugged in through the same
iterable contract.

Generators are stateful single-owner objects; clone() snapshots the state for
deterministic parallel replay.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .qubits import BasisAlphabet


@dataclass(frozen=True)
class SeedKey:
    """Ordered secret bit vector, length >= 1."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) < 1:
            raise ValueError("seed key needs at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("seed key bits must be 0 or 1")
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))

    @classmethod
    def from_string(cls, text: str) -> "SeedKey":
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"seed key string must be nonempty 0/1 text, got {text!r}")
        return cls(tuple(int(ch) for ch in text))

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    @property
    def is_zero(self) -> bool:
        return not any(self.bits)

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class LfsrSpec:
    """Tap positions of a shift register; highest tap is the register length.

    Text form is "L:tap,tap,..." (e.g. "4:4,1"), with the leading L checked
    against the highest tap.
    """

    taps: tuple[int, ...]

    def __post_init__(self):
        taps = tuple(sorted({int(t) for t in self.taps}, reverse=True))
        if len(taps) < 2:
            raise ValueError("at least two taps are required")
        if taps[-1] < 1:
            raise ValueError("tap positions start at 1")
        object.__setattr__(self, "taps", taps)

    @property
    def length(self) -> int:
        return self.taps[0]

    @classmethod
    def from_text(cls, text: str) -> "LfsrSpec":
        try:
            head, tail = text.split(":", 1)
            length = int(head)
            taps = tuple(int(t) for t in tail.split(","))
        except ValueError as exc:
            raise ValueError(f"LFSR spec must look like 'L:tap,tap,...', got {text!r}") from exc
        spec = cls(taps)
        if spec.length != length:
            raise ValueError(f"declared length {length} != highest tap {spec.length} in {text!r}")
        return spec

    def to_text(self) -> str:
        return f"{self.length}:{','.join(str(t) for t in self.taps)}"


class LfsrGenerator:
    """Fibonacci-configuration LFSR over the seed-key state.

    The output bit leaves at position 1 and the feedback enters at position L;
    tap t combines the bit sitting t stages before the feedback point, which
    realizes the recurrence

        a[k+L] = XOR over taps t of a[k+L-t],   a[0..L-1] = seed bits,

    i.e. the usual shift-register-table convention where taps name the
    exponents of the connection polynomial 1 + sum_t x^t. The all-zero seed is
    rejected: its cycle is degenerate. A register of length L has at most
    2^L - 1 nonzero states, so the maximal period is 2^L - 1, attained exactly
    when the connection polynomial is primitive.
    """

    def __init__(self, spec: LfsrSpec, seed: SeedKey):
        if len(seed) != spec.length:
            raise ValueError(f"seed length {len(seed)} != register length {spec.length}")
        if seed.is_zero:
            raise ValueError("all-zero seed is rejected (degenerate cycle)")
        self._spec = spec
        self._length = spec.length
        self._mask = sum(1 << (spec.length - t) for t in spec.taps)
        self._state = sum(bit << i for i, bit in enumerate(seed.bits))

    @property
    def state(self) -> int:
        return self._state

    def clone(self) -> "LfsrGenerator":
        dup = object.__new__(LfsrGenerator)
        dup._spec, dup._length, dup._mask, dup._state = (
            self._spec, self._length, self._mask, self._state,
        )
        return dup

    def __iter__(self):
        return self

    def __next__(self) -> int:
        out = self._state & 1
        feedback = (self._state & self._mask).bit_count() & 1
        self._state = (self._state >> 1) | (feedback << (self._length - 1))
        return out

    def take(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.uint8)
        state, mask, top = self._state, self._mask, self._length - 1
        for i in range(count):
            out[i] = state & 1
            state = (state >> 1) | (((state & mask).bit_count() & 1) << top)
        self._state = state
        return out


def lfsr_stream(spec: LfsrSpec, seed: SeedKey, count: int) -> np.ndarray:
    """First `count` output bits of the register started from `seed`."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    return LfsrGenerator(spec, seed).take(count)


def lfsr_period(spec: LfsrSpec, seed: SeedKey) -> int:
    """Smallest T > 0 with state(T) = state(0), by direct simulation.

    Exhaustive, so register lengths above 24 are refused.
    """
    if spec.length > 24:
        raise ValueError("exhaustive period search supports register lengths up to 24")
    gen = LfsrGenerator(spec, seed)
    start = gen.state
    steps = 0
    while True:
        next(gen)
        steps += 1
        if gen.state == start:
            return steps


@dataclass(frozen=True)
class RunningKey:
    """Sequence of n basis selectors, each in [0, m)."""

    selectors: np.ndarray
    m: int

    def __post_init__(self):
        sel = np.asarray(self.selectors, dtype=np.int64)
        if sel.ndim != 1:
            raise ValueError("selectors must be one-dimensional")
        if sel.size and (sel.min() < 0 or sel.max() >= self.m):
            raise ValueError(f"selectors must lie in [0, {self.m})")
        sel.setflags(write=False)
        object.__setattr__(self, "selectors", sel)

    def __len__(self) -> int:
        return int(self.selectors.size)


def expand_running_key(bit_source, n: int, alphabet: BasisAlphabet) -> RunningKey:
    """Consume n*log2(m) bits from the source, big-endian grouped into selectors.

    Prefix-stable: extending n extends, never changes, earlier selectors.
    Finite sources that run out raise a keystream-exhausted error.
    """
    if n < 0:
        raise ValueError("selector count must be nonnegative")
    k = alphabet.bits_per_selector
    need = n * k
    if isinstance(bit_source, (np.ndarray, list, tuple)):
        arr = np.asarray(bit_source, dtype=np.uint8)
        if arr.size < need:
            raise ValueError(f"keystream exhausted: needed {need} bits, got {arr.size}")
        raw = arr[:need]
    elif callable(getattr(bit_source, "take", None)):
        raw = np.asarray(bit_source.take(need), dtype=np.uint8)
        if raw.size < need:
            raise ValueError(f"keystream exhausted: needed {need} bits, got {raw.size}")
    else:
        try:
            raw = np.fromiter(itertools.islice(iter(bit_source), need), dtype=np.uint8, count=need)
        except ValueError:
            raise ValueError(f"keystream exhausted before {need} bits") from None
    if raw.size and (raw > 1).any():
        raise ValueError("bit source yielded non-bit values")
    weights = 1 << np.arange(k - 1, -1, -1, dtype=np.int64)
    selectors = raw.reshape(n, k).astype(np.int64) @ weights
    return RunningKey(selectors, alphabet.m)


def repetition_running_key(key: SeedKey, n: int) -> RunningKey:
    """Stretch an m_k-bit key over n two-basis selectors in contiguous blocks.

    Selector i is key bit (i*m_k) // n: blocks of length n/m_k per key bit when
    m_k divides n, with the trailing block truncated otherwise. The block
    layout is what makes a per-block guessing attack well-defined.
    """
    m_k = len(key)
    if m_k > n:
        raise ValueError(f"key length {m_k} exceeds sequence length {n}")
    idx = (np.arange(n, dtype=np.int64) * m_k) // n
    return RunningKey(np.array(key.bits, dtype=np.int64)[idx], 2)


@dataclass(frozen=True)
class LfsrKeystream:
    """Protocol keystream choice: LFSR expansion of the seed key."""

    spec: LfsrSpec
    seed: SeedKey

    kind = "lfsr"

    def __post_init__(self):
        LfsrGenerator(self.spec, self.seed)  # validates length and nonzero seed

    def running_key(self, n: int, alphabet: BasisAlphabet) -> RunningKey:
        return expand_running_key(LfsrGenerator(self.spec, self.seed), n, alphabet)

    @property
    def secret_bits(self) -> int:
        return len(self.seed)


@dataclass(frozen=True)
class RepetitionKeystream:
    """Protocol keystream choice: repetition expansion (two-basis alphabet only)."""

    key: SeedKey

    kind = "repetition"

    def running_key(self, n: int, alphabet: BasisAlphabet) -> RunningKey:
        if alphabet.m != 2:
            raise ValueError("repetition keys drive the two-basis alphabet only")
        return repetition_running_key(self.key, n)

    @property
    def secret_bits(self) -> int:
        return len(self.key)
