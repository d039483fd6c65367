# aoi_priority/age.py
"""
Virtual service time of ordinary packets and the M/G/1 lower bound on
their average age.

Y  : head-of-line occupancy of an ordinary packet that does not find the
     server busy with a lone priority packet (state q'1)
Y' : the same, when it does find state q'1
Z  : the unconditional mixture of the two
"""

from typing import Iterable, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from aoi_priority.analytic import check_stability, quadratic_roots
from aoi_priority.errors import OutOfDomain, SingularDenominator
from aoi_priority.gate import require_stable
from aoi_priority.log import get_logger
from aoi_priority.model import ModelParams

log = get_logger(__name__)

# relative discriminant under which alpha1 and alpha2 are treated as one root
COINCIDENT_RTOL = 1e-12


class VirtualServiceLaw(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    u: float
    v: float
    mean_Y: float
    m2_Y: float
    mean_Yp: float
    m2_Yp: float
    pi_prime_1: float
    mean_Z: float
    m2_Z: float

    def mixture_mean(self) -> float:
        return self.pi_prime_1 * self.mean_Yp + (1.0 - self.pi_prime_1) * self.mean_Y

    def mixture_m2(self) -> float:
        return self.pi_prime_1 * self.m2_Yp + (1.0 - self.pi_prime_1) * self.m2_Y


class SystemTimeLB(BaseModel):
    """
    System time of the fictitious M/G/1 queue (service law Y):

        f_T(t) = -c1 exp(-alpha1 t) - c2 exp(-alpha2 t)

    When the two roots coincide (coincident=True, alpha1 == alpha2 == alpha):

        f_T(t) = -c1 t exp(-alpha t) - c2 exp(-alpha t)
    """

    model_config = ConfigDict(frozen=True)

    rho: float
    alpha1: float
    alpha2: float
    c1: float
    c2: float
    coincident: bool = False


# =========================================================
# Race outcomes and detour flow graphs
# =========================================================

def clock_probabilities(params: ModelParams) -> Tuple[float, float, float, float]:
    """
    a: ordinary service beats the next priority arrival
    b: a priority arrival beats the priority service (replacement)
    u: priority service beats the next priority arrival
    v: a priority arrival beats the ordinary service (preemption)
    """
    l2, m1, m2 = params.lambda2, params.mu1, params.mu2
    a = m1 / (m1 + l2)
    b = l2 / (m2 + l2)
    u = m2 / (m2 + l2)
    v = l2 / (m1 + l2)
    return a, b, u, v


def _detour_denominator(b, u, v, d2, d3, d4) -> float:
    den = 1.0 - b * d2 - u * d3 * v * d4
    if abs(den) < 1e-15:
        raise SingularDenominator(f"1 - b*D2 - u*D3*v*D4 = {den!r}")
    return den


def detour_gf_h1(a: float, b: float, u: float, v: float,
                 d1: float, d2: float, d3: float, d4: float) -> float:
    """Generating function of the detour graph for Y (start serving the ordinary packet)."""
    den = _detour_denominator(b, u, v, d2, d3, d4)
    return a * d1 * (1.0 - b * d2) / den


def detour_gf_h2(a: float, b: float, u: float, v: float,
                 d1: float, d2: float, d3: float, d4: float) -> float:
    """Generating function of the detour graph for Y' (start behind a priority packet)."""
    den = _detour_denominator(b, u, v, d2, d3, d4)
    return a * d1 * u * d3 / den


# =========================================================
# MGFs of Y and Y'
# =========================================================

def service_strip(params: ModelParams) -> float:
    """Upper end of the convergence strip of phi_Y and phi_Y'."""
    small, _ = quadratic_roots(-(params.mu1 + params.mu2 + params.lambda2), params.mu1 * params.mu2)
    return small


def _service_denominator(params: ModelParams, s: float) -> float:
    if s >= service_strip(params):
        raise OutOfDomain(f"phi_Y diverges at s={s} (strip ends at {service_strip(params)})")
    m1, m2 = params.mu1, params.mu2
    return s * s - s * (m2 + m1 + params.lambda2) + m1 * m2


def mgf_y(params: ModelParams, s: float) -> float:
    return params.mu1 * (params.mu2 - s) / _service_denominator(params, s)


def mgf_yp(params: ModelParams, s: float) -> float:
    return params.mu1 * params.mu2 / _service_denominator(params, s)


def clock_mgfs(params: ModelParams, s: float) -> Tuple[float, float, float, float]:
    """E[e^{sA}], E[e^{sB}], E[e^{sU}], E[e^{sV}]: A and V at rate lambda2+mu1, B and U at lambda2+mu2."""
    r1 = params.lambda2 + params.mu1
    r2 = params.lambda2 + params.mu2
    if s >= min(r1, r2):
        raise OutOfDomain(f"clock MGF diverges at s={s}")
    d_av = r1 / (r1 - s)
    d_bu = r2 / (r2 - s)
    return d_av, d_bu, d_bu, d_av


def mgf_y_detour(params: ModelParams, s: float) -> float:
    if s >= service_strip(params):
        raise OutOfDomain(f"phi_Y diverges at s={s}")
    return detour_gf_h1(*clock_probabilities(params), *clock_mgfs(params, s))


def mgf_yp_detour(params: ModelParams, s: float) -> float:
    if s >= service_strip(params):
        raise OutOfDomain(f"phi_Y' diverges at s={s}")
    return detour_gf_h2(*clock_probabilities(params), *clock_mgfs(params, s))


def sample_virtual_service(params: ModelParams, n: int, seed: int = 0,
                           finds_priority: bool = False) -> np.ndarray:
    """
    Draw n virtual service times by walking the race chain directly.
    finds_priority=False gives Y, True gives Y'.
    """
    rng = np.random.default_rng(seed)
    a, _, u, _ = clock_probabilities(params)
    r_ord = params.mu1 + params.lambda2
    r_pri = params.mu2 + params.lambda2

    out = np.empty(n)
    for k in range(n):
        total = 0.0
        serving_ordinary = not finds_priority
        while True:
            if serving_ordinary:
                total += rng.exponential(1.0 / r_ord)
                if rng.random() < a:
                    break
                serving_ordinary = False
            else:
                total += rng.exponential(1.0 / r_pri)
                if rng.random() < u:
                    serving_ordinary = True
        out[k] = total
    return out


# =========================================================
# Moments
# =========================================================

def virtual_service_moments(params: ModelParams) -> VirtualServiceLaw:
    require_stable(params)
    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    a, b, u, v = clock_probabilities(params)

    mm = m1 * m2
    mean_y = (m2 + l2) / mm
    mean_yp = (m1 + m2 + l2) / mm
    m2_y = 2.0 * ((m2 + l2) ** 2 + m1 * l2) / mm**2
    m2_yp = 2.0 * ((m1 + m2 + l2) ** 2 - mm) / mm**2

    pi_prime_1 = check_stability(params).pi0 * l2 / (l1 + m2)

    mean_z = l2 / ((l1 + m2) * (m2 + l2)) + (l1 + l2 + m2) / (m1 * (l1 + m2))
    m2_z = 2.0 * ((l2 + m2) ** 2 * (l2 + m2 + l1) + l2 * m1 * (2 * l2 + m1 + 2 * m2)) / (
        m1 * m1 * m2 * (l1 + m2) * (l2 + m2)
    )

    return VirtualServiceLaw(
        a=a, b=b, u=u, v=v,
        mean_Y=mean_y, m2_Y=m2_y,
        mean_Yp=mean_yp, m2_Yp=m2_yp,
        pi_prime_1=pi_prime_1,
        mean_Z=mean_z, m2_Z=m2_z,
    )


# =========================================================
# Fictitious M/G/1 system time
# =========================================================

def system_time_lb(params: ModelParams) -> SystemTimeLB:
    require_stable(params)
    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2

    rho = l1 * (m2 + l2) / (m1 * m2)
    total = m1 + m2 + l2 - l1
    product = m1 * m2 - l1 * m2 - l1 * l2

    if total * total - 4.0 * product < COINCIDENT_RTOL * total * total:
        alpha = 0.5 * total
        return SystemTimeLB(
            rho=rho, alpha1=alpha, alpha2=alpha,
            c1=-(1.0 - rho) * m1 * (m2 - alpha),
            c2=-(1.0 - rho) * m1,
            coincident=True,
        )

    alpha2, alpha1 = quadratic_roots(-total, product)
    k = (1.0 - rho) * m1
    c1 = k * (m2 - alpha1) / (alpha1 - alpha2)
    c2 = k * (m2 - alpha2) / (alpha2 - alpha1)
    log.debug("system_time.solved", rho=rho, alpha1=alpha1, alpha2=alpha2)
    return SystemTimeLB(rho=rho, alpha1=alpha1, alpha2=alpha2, c1=c1, c2=c2)


def system_time_density(lb: SystemTimeLB, t):
    t = np.asarray(t, dtype=float)
    if lb.coincident:
        return (-lb.c1 * t - lb.c2) * np.exp(-lb.alpha1 * t)
    return -lb.c1 * np.exp(-lb.alpha1 * t) - lb.c2 * np.exp(-lb.alpha2 * t)


def system_time_mgf(params: ModelParams, s: float) -> float:
    """(1 - rho) mu1 (mu2 - s) / (s^2 - s(mu1 + mu2 + lambda2 - lambda1) + alpha1 alpha2)."""
    lb = system_time_lb(params)
    if s >= lb.alpha2:
        raise OutOfDomain(f"phi_T diverges at s={s} (alpha2={lb.alpha2})")
    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    den = s * s - s * (m1 + m2 + l2 - l1) + m1 * m2 - l1 * m2 - l1 * l2
    return (1.0 - lb.rho) * m1 * (m2 - s) / den


def mean_system_time_lb(lb: SystemTimeLB) -> float:
    if lb.coincident:
        a = lb.alpha1
        return -lb.c1 * 2.0 / a**3 - lb.c2 / a**2
    return -lb.c1 / lb.alpha1**2 - lb.c2 / lb.alpha2**2


def overlap_from_terms(lambda1: float, terms: Iterable[Tuple[float, float]]) -> float:
    """
    E[X (T - X)+] with X ~ Exp(lambda1) independent of T, where T has density
    sum_i w_i exp(-alpha_i t) over the given (w_i, alpha_i) terms.
    """
    total = 0.0
    for w, alpha in terms:
        total += w * lambda1 / (alpha**2 * (lambda1 + alpha) ** 2)
    return total


def expected_overlap(params: ModelParams) -> float:
    """E[X (T - X)+], the double integral over the two-exponential density done exactly."""
    lb = system_time_lb(params)
    l1 = params.lambda1
    if lb.coincident:
        a = lb.alpha1
        ramp = -lb.c1 * l1 * (2.0 / (a**2 * (l1 + a) ** 3) + 2.0 / (a**3 * (l1 + a) ** 2))
        return ramp + overlap_from_terms(l1, [(-lb.c2, a)])
    return overlap_from_terms(l1, [(-lb.c1, lb.alpha1), (-lb.c2, lb.alpha2)])


def age_lower_bound(params: ModelParams) -> float:
    """
    Exact average age of the fictitious system, a lower bound for the ordinary stream:
        lambda1 (E[X^2]/2 + E[T X]),  E[T X] = E[X (T - X)+] + E[Y]/lambda1
    """
    l1 = params.lambda1
    law = virtual_service_moments(params)
    e_x2 = 2.0 / (l1 * l1)
    e_tx = expected_overlap(params) + law.mean_Y / l1
    return l1 * (0.5 * e_x2 + e_tx)


def overlap_rational_form(params: ModelParams) -> float:
    """
    Expanded rational-coefficient form of E[X (T - X)+] that circulates for
    this model. It is wrong (negative at lambda=(2, 5), mu=(10, 5)); kept only
    so the validation suite can show the disagreement with the integral form.
    """
    require_stable(params)
    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    rho = l1 * (m2 + l2) / (m1 * m2)
    s = m1 + m2 + l2 - l1
    p = m1 * m2 - l1 * m2 - l1 * l2
    k = l1 * (1.0 - rho) * m1
    den = m1**2 * (l1 + m2) ** 2 * p**2
    first = (s * s - p) * (m2 + 2 * l1 * m2 - p)
    second = s * (l1 * l1 * m2 - 2 * l1 * p) - l1 * l1 * p
    return k * (first + second) / den
