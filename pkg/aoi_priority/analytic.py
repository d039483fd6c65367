# aoi_priority/analytic.py
"""
Closed-form engine: stability, stationary distribution of the two-row chain,
queue-length statistics and the headline ages.

Chain states: q0 is idle, q_i serves an ordinary packet, q'_i serves a
priority packet; both with i-1 ordinary packets waiting.
"""

import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from aoi_priority.errors import InvalidRate, OutOfDomain, UnstableSystem
from aoi_priority.gate import require_positive, require_stable, stability_margin
from aoi_priority.log import get_logger
from aoi_priority.model import ModelParams

log = get_logger(__name__)

TAIL_TARGET = 1e-10
I_MAX_MIN = 8
I_MAX_MAX = 100_000

Vec4 = Tuple[float, float, float, float]


# =========================================================
# Types
# =========================================================

class StabilityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    margin: float
    is_stable: bool
    pi0: Optional[float] = None


class SpectralDecomposition(BaseModel):
    model_config = ConfigDict(frozen=True)

    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    l1: float
    l2: float
    e1: Vec4
    e2: Vec4
    mix: float

    def char_poly(self, l: float) -> float:
        return l * l - l * (self.a1 + self.a5 - 1.0) + self.a3 * self.a5


class StationaryDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    pi0: float
    ladder: List[Tuple[float, float]]
    tail_mass: float

    @property
    def i_max(self) -> int:
        return len(self.ladder)

    @property
    def pi(self) -> np.ndarray:
        """pi_1 .. pi_imax (busy with an ordinary packet)."""
        return np.array([p for p, _ in self.ladder])

    @property
    def pi_prime(self) -> np.ndarray:
        """pi'_1 .. pi'_imax (busy with a priority packet)."""
        return np.array([q for _, q in self.ladder])


# =========================================================
# Helpers
# =========================================================

def quadratic_roots(b: float, c: float) -> Tuple[float, float]:
    """
    Real roots of x^2 + b x + c, returned as (smaller, larger).

    Uses q = -(b + sign(b) sqrt(disc)) / 2, roots q and c/q, so that the
    small root does not cancel. A slightly negative discriminant from
    rounding is clamped to zero.
    """
    disc = b * b - 4.0 * c
    if disc < 0.0:
        if disc < -1e-12 * b * b:
            raise ArithmeticError(f"complex roots: discriminant {disc!r}")
        disc = 0.0
    sign = 1.0 if b >= 0.0 else -1.0
    q = -0.5 * (b + sign * math.sqrt(disc))
    if q == 0.0:
        return 0.0, 0.0
    r1, r2 = q, c / q
    return (r1, r2) if r1 <= r2 else (r2, r1)


def _rate_ratios(params: ModelParams) -> Tuple[float, float, float, float, float]:
    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    a1 = 1.0 + params.lam / m1 - m2 * l2 / (m1 * (m2 + l1))
    a2 = m2 * l1 / (m1 * (m2 + l1))
    a3 = l1 / m1
    a4 = l2 / (m2 + l1)
    a5 = l1 / (m2 + l1)
    return a1, a2, a3, a4, a5


def _eigvec(l: float, a4: float, a5: float) -> Vec4:
    return (l * (l - a5), l * a4, l - a5, a4)


# =========================================================
# Operations
# =========================================================

def check_stability(params: ModelParams) -> StabilityReport:
    margin = stability_margin(params)
    if margin <= 0.0:
        return StabilityReport(margin=margin, is_stable=False)
    pi0 = params.mu2 / (params.mu2 + params.lambda2) - params.lambda1 / params.mu1
    return StabilityReport(margin=margin, is_stable=True, pi0=pi0)


def spectral(params: ModelParams) -> SpectralDecomposition:
    require_stable(params)
    a1, a2, a3, a4, a5 = _rate_ratios(params)

    l1, l2 = quadratic_roots(-(a1 + a5 - 1.0), a3 * a5)
    if not 0.0 < l1 <= l2 < 1.0:
        raise UnstableSystem(f"eigenvalues ({l1}, {l2}) outside (0, 1)")

    gap = l2 - l1
    mix = 1.0 / gap if gap > 0.0 else math.inf

    return SpectralDecomposition(
        a1=a1, a2=a2, a3=a3, a4=a4, a5=a5,
        l1=l1, l2=l2,
        e1=_eigvec(l1, a4, a5),
        e2=_eigvec(l2, a4, a5),
        mix=mix,
    )


def h_matrix(params: ModelParams) -> np.ndarray:
    """
    Transfer matrix H with [pi_{i+1}, pi'_{i+1}, pi_i, pi'_i] = H [pi_i, pi'_i, pi_{i-1}, pi'_{i-1}].
    """
    a1, a2, a3, a4, a5 = _rate_ratios(params)
    return np.array([
        [a1, -a2, -a3, 0.0],
        [a4, a5, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ])


def default_i_max(params: ModelParams) -> int:
    """Smallest ladder length whose geometric tail (rate l2) drops under 1e-10."""
    pi0 = check_stability(params).pi0
    sd = spectral(params)
    n = math.ceil(math.log(TAIL_TARGET / pi0) / math.log(sd.l2))
    return int(min(max(n, I_MAX_MIN), I_MAX_MAX))


def stationary(params: ModelParams, i_max: Optional[int] = None) -> StationaryDistribution:
    """
    Closed spectral form:
        (pi_i, pi'_i) = mix * pi0 * (l2^i (l2 - a5) - l1^i (l1 - a5), a4 (l2^i - l1^i))

    Falls back to the H recursion when the two eigenvalues coincide
    (only possible with lambda2 = 0 and mu1 = mu2 + lambda1).
    """
    sd = spectral(params)
    if i_max is None:
        i_max = default_i_max(params)
    if i_max < 1:
        raise ValueError(f"i_max must be >= 1, got {i_max}")

    if not math.isfinite(sd.mix) or (sd.l2 - sd.l1) <= 1e-6 * sd.l2:
        return stationary_by_recursion(params, i_max)

    pi0 = check_stability(params).pi0
    i = np.arange(1, i_max + 1, dtype=float)
    p1, p2 = sd.l1 ** i, sd.l2 ** i
    pi = sd.mix * pi0 * (p2 * (sd.l2 - sd.a5) - p1 * (sd.l1 - sd.a5))
    pi_prime = sd.mix * pi0 * sd.a4 * (p2 - p1)

    return _distribution(pi0, pi, pi_prime)


def stationary_by_recursion(params: ModelParams, i_max: int) -> StationaryDistribution:
    """Secondary path: iterate A_i = H A_{i-1} from A_0 = [a1 - 1, a4, 1, 0] pi0."""
    require_stable(params)
    if i_max < 1:
        raise ValueError(f"i_max must be >= 1, got {i_max}")

    a1, _, _, a4, _ = _rate_ratios(params)
    pi0 = check_stability(params).pi0
    h = h_matrix(params)

    a = np.array([a1 - 1.0, a4, 1.0, 0.0]) * pi0
    pi = np.empty(i_max)
    pi_prime = np.empty(i_max)
    for k in range(i_max):
        a = h @ a
        pi[k], pi_prime[k] = a[2], a[3]

    return _distribution(pi0, pi, pi_prime)


def _distribution(pi0: float, pi: np.ndarray, pi_prime: np.ndarray) -> StationaryDistribution:
    tail = 1.0 - pi0 - float(np.sum(pi) + np.sum(pi_prime))
    log.debug("stationary.solved", i_max=len(pi), tail_mass=tail)
    return StationaryDistribution(
        pi0=pi0,
        ladder=list(zip(pi.tolist(), pi_prime.tolist())),
        tail_mass=tail,
    )


def queue_length_pmf(params: ModelParams, n_max: int) -> np.ndarray:
    """P(N = n) for n = 0..n_max, N the number of ordinary packets: pi_n + pi'_{n+1}."""
    dist = stationary(params, n_max + 1)
    pi = np.concatenate(([dist.pi0], dist.pi[:n_max]))
    return pi + dist.pi_prime[: n_max + 1]


def queue_length_mgf(params: ModelParams, s: float) -> float:
    """
    E[exp(s N)]. The denominator is mu1(mu2 + lambda1)(1 - l1 e^s)(1 - l2 e^s),
    so the series converges iff e^s < 1/l2.
    """
    sd = spectral(params)
    x = math.exp(s)
    if x * sd.l2 >= 1.0:
        raise OutOfDomain(f"phi_N diverges at s={s}: e^s={x} >= 1/l2={1.0 / sd.l2}")

    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    pi0 = check_stability(params).pi0
    num = pi0 * m1 * (l1 + l2 + m2 - l1 * x)
    den = m1 * m2 + m1 * l1 - x * (l1 * l1 + l1 * l2 + l1 * m1 + l1 * m2) + l1 * l1 * x * x
    return num / den


def expected_queue_length(params: ModelParams) -> float:
    require_stable(params)
    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    return l1 * (2 * l2 * m2 + l2 * m1 + l2 * l2 + m2 * m2) / (
        (m2 + l2) * (m1 * m2 - l1 * (m2 + l2))
    )


def peak_age_ordinary(params: ModelParams) -> float:
    require_stable(params)
    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    return 1.0 / l1 + (2 * l2 * m2 + l2 * m1 + l2 * l2 + m2 * m2) / (
        (m2 + l2) * (m1 * m2 - l1 * (m2 + l2))
    )


def priority_age(params: ModelParams) -> float:
    """M/M/1/1 with preemption: the priority stream never sees the ordinary one."""
    if params.lambda2 <= 0.0:
        raise InvalidRate(f"lambda2 must be > 0 for the priority age, got {params.lambda2}")
    require_positive("mu2", params.mu2)
    return 1.0 / params.mu2 + 1.0 / params.lambda2


def priority_busy_fraction(params: ModelParams) -> float:
    """Long-run fraction of time spent serving priority packets (states q'_i)."""
    return params.lambda2 / (params.lambda2 + params.mu2)


def reference_mm1_age(lambda1: float, mu1: float) -> float:
    require_positive("lambda1", lambda1)
    require_positive("mu1", mu1)
    if lambda1 >= mu1:
        raise UnstableSystem(f"M/M/1 reference needs lambda1 < mu1, got {lambda1} >= {mu1}")
    rho = lambda1 / mu1
    return (1.0 / mu1) * (1.0 + 1.0 / rho + rho * rho / (1.0 - rho))
