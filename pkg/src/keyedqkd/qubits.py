"""Real-plane qubit algebra: encoding, projective measurement, density matrices,
minimum-error discrimination, and eavesdropper error-rate functionals.

Every state handled here lies on the real great circle of the Bloch sphere, so a
pure state is a single angle theta with vector (cos theta, sin theta), and an
orthogonal measurement basis is a single angle phi with vectors
(cos phi, sin phi) and (-sin phi, cos phi). Density matrices keep a complex 2x2
container for generality, but all in-scope entries are real.

Measurement searches are restricted to orthogonal projective measurements:
for the binary decision problems treated here, general POVMs reduce to
orthogonal ones on a qubit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

HALF_PI = math.pi / 2

# Angle / matrix-invariant tolerance; probability assertions elsewhere use 1e-9.
ANGLE_TOL = 1e-12

# Grid values within this distance of the minimum are treated as exact ties,
# so co-minimizers are resolved by angle rather than by float noise.
_TIE_TOL = 1e-12


def _wrap(angle: float, period: float) -> float:
    a = math.fmod(angle, period)
    if a < 0.0:
        a += period
    if a >= period:  # fmod rounding can land exactly on the period
        a = 0.0
    return a


@dataclass(frozen=True)
class StateAngle:
    """Pure qubit state (cos theta, sin theta); theta normalized to [0, pi).

    A vector and its negation are the same state, hence the modulo-pi range.
    """

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap(float(self.theta), math.pi))

    def vector(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    def orthogonal(self) -> "StateAngle":
        return StateAngle(self.theta + HALF_PI)


@dataclass(frozen=True)
class MeasBasis:
    """Orthogonal basis {(cos phi, sin phi), (-sin phi, cos phi)}.

    phi is canonical in [0, pi/2); outcome 0 labels the vector at phi. The
    basis at phi + pi/2 is the same vector set with outcome labels swapped and
    normalizes to the same canonical form.
    """

    phi: float

    def __post_init__(self):
        object.__setattr__(self, "phi", _wrap(float(self.phi), HALF_PI))

    def vectors(self) -> tuple[np.ndarray, np.ndarray]:
        c, s = math.cos(self.phi), math.sin(self.phi)
        return np.array([c, s]), np.array([-s, c])


@dataclass(frozen=True)
class BasisAlphabet:
    """Family of m measurement bases at angles j*(pi/2)/m for j in [0, m).

    m must be a power of two (>= 2) so that running-key selectors consume
    whole keystream bits. m = 2 is the standard four-state alphabet.
    """

    m: int

    def __post_init__(self):
        if self.m < 2 or (self.m & (self.m - 1)) != 0:
            raise ValueError(f"basis count must be a power of two >= 2, got {self.m}")

    def basis_angle(self, j: int) -> float:
        if not 0 <= j < self.m:
            raise ValueError(f"basis index {j} out of range [0, {self.m})")
        return j * (HALF_PI / self.m)

    def basis(self, j: int) -> MeasBasis:
        return MeasBasis(self.basis_angle(j))

    def angles(self) -> np.ndarray:
        """All basis angles as a vector, strictly increasing in [0, pi/2)."""
        return np.arange(self.m) * (HALF_PI / self.m)

    @property
    def bits_per_selector(self) -> int:
        return self.m.bit_length() - 1


@dataclass(frozen=True)
class DensityMatrix:
    """2x2 Hermitian, positive-semidefinite, unit-trace matrix.

    Invariants are enforced at construction: Hermitian within 1e-12, trace 1
    within 1e-12, eigenvalues >= -1e-12. The stored array is read-only.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.shape != (2, 2):
            raise ValueError(f"density matrix must be 2x2, got shape {a.shape}")
        if not np.allclose(a, a.conj().T, rtol=0.0, atol=ANGLE_TOL):
            raise ValueError("density matrix is not Hermitian within tolerance")
        if abs(a.trace() - 1.0) > ANGLE_TOL:
            raise ValueError(f"density matrix trace {a.trace()} != 1 within tolerance")
        if float(np.linalg.eigvalsh(a).min()) < -ANGLE_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def pure(cls, state: StateAngle) -> "DensityMatrix":
        v = state.vector().astype(complex)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls) -> "DensityMatrix":
        return cls(np.eye(2, dtype=complex) / 2.0)


def encode_state(bit: int, basis_index: int, alphabet: BasisAlphabet) -> StateAngle:
    """State carrying `bit` in basis `basis_index`: theta = j*(pi/2)/m + bit*(pi/2)."""
    if bit not in (0, 1):
        raise ValueError(f"data bit must be 0 or 1, got {bit!r}")
    return StateAngle(alphabet.basis_angle(basis_index) + bit * HALF_PI)


def outcome_probability(state: StateAngle, basis: MeasBasis) -> float:
    """Probability of outcome 0, exactly cos^2(theta - phi)."""
    return math.cos(state.theta - basis.phi) ** 2


def measure(state: StateAngle, basis: MeasBasis, rng: np.random.Generator) -> int:
    """Sample a projective measurement outcome (0 or 1).

    Outcomes whose probability is within 1e-12 of 0 or 1 are treated as
    certain, so aligned and anti-aligned measurements are exactly
    deterministic for every rng state.
    """
    p0 = outcome_probability(state, basis)
    if p0 >= 1.0 - ANGLE_TOL:
        return 0
    if p0 <= ANGLE_TOL:
        return 1
    return 0 if rng.random() < p0 else 1


def measure_many(thetas: np.ndarray, phis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized projective measurement: outcome array for state/basis angle arrays.

    Same degenerate-probability snapping as measure(); one uniform draw per
    element regardless of degeneracy, so draw alignment is shape-stable.
    """
    p1 = np.sin(np.asarray(thetas) - np.asarray(phis)) ** 2
    p1 = np.where(p1 <= ANGLE_TOL, 0.0, np.where(p1 >= 1.0 - ANGLE_TOL, 1.0, p1))
    return (rng.random(p1.shape) < p1).astype(np.uint8)


def _mixture_entries(weights: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    c, s = np.cos(thetas), np.sin(thetas)
    off = float(np.sum(weights * c * s))
    return np.array(
        [
            [float(np.sum(weights * c * c)), off],
            [off, float(np.sum(weights * s * s))],
        ],
        dtype=complex,
    )


def density_of_mixture(components: Iterable[tuple[float, StateAngle]]) -> DensityMatrix:
    """Density matrix of a weighted mixture of pure states.

    Weights must be nonnegative and sum to 1 within 1e-12.
    """
    comp = list(components)
    if not comp:
        raise ValueError("mixture needs at least one component")
    weights = np.array([w for w, _ in comp], dtype=float)
    if (weights < 0.0).any():
        raise ValueError("mixture weights must be nonnegative")
    if abs(weights.sum() - 1.0) > ANGLE_TOL:
        raise ValueError(f"mixture weights sum to {weights.sum()}, not 1")
    thetas = np.array([st.theta for _, st in comp])
    return DensityMatrix(_mixture_entries(weights, thetas))


def helstrom_error(rho0: DensityMatrix, rho1: DensityMatrix, p0: float) -> float:
    """Minimum error probability for discriminating rho0 (prior p0) from rho1.

    Standard minimum-error bound: (1 - ||p1*rho1 - p0*rho0||_1) / 2 with the
    trace norm evaluated by eigendecomposition of the Hermitian difference.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"prior must lie in [0, 1], got {p0}")
    diff = (1.0 - p0) * rho1.entries - p0 * rho0.entries
    trace_norm = float(np.abs(np.linalg.eigvalsh(diff)).sum())
    return max(0.0, 0.5 * (1.0 - trace_norm))


def _granted_error_profile(phis: np.ndarray, alphabet: BasisAlphabet) -> np.ndarray:
    """Key-granted bit-error rate of a fixed-basis observer, per basis angle in phis."""
    thetas = alphabet.angles()
    out = np.empty(phis.size)
    chunk = max(1, 2_000_000 // alphabet.m)
    for lo in range(0, phis.size, chunk):
        d = thetas[None, :] - phis[lo:lo + chunk, None]
        s2 = np.sin(d) ** 2
        out[lo:lo + chunk] = np.minimum(s2, 1.0 - s2).mean(axis=1)
    return out


def eve_error_key_granted(basis: MeasBasis, alphabet: BasisAlphabet) -> float:
    """Average bit error of an observer who measures every qubit in `basis` and
    decodes optimally once the basis selectors are revealed to her.

    Equals (1/m) * sum_j min(sin^2, cos^2)(theta_j - phi): on each basis the
    better of the two outcome-to-bit decodings is available after disclosure.
    """
    return float(_granted_error_profile(np.array([basis.phi]), alphabet)[0])


def _golden_section_min(f, lo: float, hi: float, tol: float) -> float:
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def _granted_error_slope(phi: float, alphabet: BasisAlphabet) -> float:
    """Derivative of the key-granted error profile at phi.

    Each min(sin^2, cos^2) term contributes -sin(2*delta) on its sine branch
    and +sin(2*delta) on its cosine branch; the profile is piecewise smooth.
    """
    deltas = alphabet.angles() - phi
    s2 = np.sin(deltas) ** 2
    sign = np.where(s2 <= 0.5, -1.0, 1.0)
    return float(np.mean(sign * np.sin(2.0 * deltas)))


def _refine_minimum(f, alphabet: BasisAlphabet, lo: float, hi: float) -> float:
    """Locate the minimizer inside one basin to ~1e-12.

    Golden-section search stalls near sqrt(machine eps), so when the bracket
    has the expected falling/rising slopes the zero of the analytic derivative
    is bisected instead.
    """
    if _granted_error_slope(lo, alphabet) < 0.0 < _granted_error_slope(hi, alphabet):
        a, b = lo, hi
        while b - a > 1e-12:
            mid = (a + b) / 2.0
            if _granted_error_slope(mid, alphabet) < 0.0:
                a = mid
            else:
                b = mid
        return (a + b) / 2.0
    return _golden_section_min(f, lo, hi, tol=1e-10)


@lru_cache(maxsize=None)
def optimal_fixed_basis(alphabet: BasisAlphabet, grid_points: int = 4096) -> tuple[MeasBasis, float]:
    """Fixed measurement basis minimizing the key-granted error, with its error.

    Grid scan over [0, pi/2) followed by sub-nanoradian refinement of the best
    basin. Co-minimizers (the error profile has period (pi/2)/m) are tie-broken
    toward the smallest angle, with grid values within 1e-12 of the minimum
    treated as exact ties.
    """
    if grid_points < 4096:
        raise ValueError("grid must have at least 4096 points")
    step = HALF_PI / grid_points
    grid = np.arange(grid_points) * step
    values = _granted_error_profile(grid, alphabet)
    tied = np.nonzero(values <= values.min() + _TIE_TOL)[0]
    best = int(tied.min())

    def f(phi: float) -> float:
        return float(_granted_error_profile(np.array([phi]), alphabet)[0])

    phi_star = _refine_minimum(f, alphabet, grid[best] - step, grid[best] + step)
    return MeasBasis(phi_star), f(phi_star)


def keyless_error(alphabet: BasisAlphabet) -> float:
    """Minimum bit error of an observer who never learns the basis selectors.

    Helstrom discrimination of the two equal-weight bit ensembles over the
    labeled basis family. Adjacent bases take opposite bit orientation, so the
    2m encodings tile the state circle uniformly: with that layout both bit
    ensembles converge to the maximally mixed state and the keyless error
    approaches its maximum 1/2 as m grows. For m = 2 the value coincides with
    the optimal fixed-basis error, (2 - sqrt(2))/4.
    """
    j = np.arange(alphabet.m)
    bit0 = j * (HALF_PI / alphabet.m) + (j % 2) * HALF_PI
    weights = np.full(alphabet.m, 1.0 / alphabet.m)
    rho0 = DensityMatrix(_mixture_entries(weights, bit0))
    rho1 = DensityMatrix(_mixture_entries(weights, bit0 + HALF_PI))
    return helstrom_error(rho0, rho1, 0.5)
