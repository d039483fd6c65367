# aoi_priority/ctmc.py
"""
Numerical ground truth: truncated generator of the two-row chain, solved by
direct sparse linear algebra.

Index layout for truncation K (dimension 2K + 1):
    0        -> q0
    1..K     -> q1..qK
    K+1..2K  -> q'1..q'K
"""

import math
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict
from scipy.sparse.linalg import spsolve

from aoi_priority.analytic import check_stability, spectral
from aoi_priority.errors import InvalidConfig, NearBoundary, SingularSystem
from aoi_priority.log import get_logger
from aoi_priority.model import ModelParams

log = get_logger(__name__)

K_MIN = 64
K_MAX = 10_000
TAIL_TARGET = 1e-12
# boundary mass above this marks a truncation that did not capture the chain
TAIL_FLAG = 1e-6


class GeneratorMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: int
    q: sp.csr_matrix
    dropped: List[Tuple[str, float]]

    @property
    def dimension(self) -> int:
        return 2 * self.K + 1


class OracleSolution(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: int
    probabilities: np.ndarray
    boundary_mass: float
    non_vanishing_tail: bool

    @property
    def pi0(self) -> float:
        return float(self.probabilities[0])

    @property
    def pi(self) -> np.ndarray:
        return self.probabilities[1 : self.K + 1]

    @property
    def pi_prime(self) -> np.ndarray:
        return self.probabilities[self.K + 1 :]


def q_index(i: int) -> int:
    return i


def q_prime_index(i: int, K: int) -> int:
    return K + i


def state_label(index: int, K: int) -> str:
    if index <= K:
        return f"q{index}"
    return f"q'{index - K}"


def default_truncation(params: ModelParams) -> int:
    """max(64, first K whose geometric tail bound drops below 1e-12), capped at 10^4."""
    report = check_stability(params)
    if not report.is_stable:
        return K_MIN
    try:
        l2 = spectral(params).l2
    except NearBoundary:
        return K_MAX
    n = math.ceil(math.log(TAIL_TARGET / report.pi0) / math.log(l2))
    return int(min(max(n, K_MIN), K_MAX))


def build_generator(params: ModelParams, K: int) -> GeneratorMatrix:
    """
    Rates (reflecting at K: up-moves out of level K are dropped):
        q0   -> q1 @ lambda1,  q0 -> q'1 @ lambda2
        qi   -> qi+1 @ lambda1, qi -> q'i+1 @ lambda2, qi -> qi-1 @ mu1
        q'i  -> q'i+1 @ lambda1, q'i -> qi-1 @ mu2
    """
    if K < 2:
        raise InvalidConfig(f"truncation K must be >= 2, got {K}")

    l1, l2, m1, m2 = params.lambda1, params.lambda2, params.mu1, params.mu2
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    dropped: List[Tuple[str, float]] = []

    def add(src: int, dst: int, rate: float) -> None:
        if rate > 0.0:
            rows.append(src)
            cols.append(dst)
            vals.append(rate)

    add(0, q_index(1), l1)
    add(0, q_prime_index(1, K), l2)

    for i in range(1, K + 1):
        src = q_index(i)
        add(src, q_index(i - 1), m1)
        if i < K:
            add(src, q_index(i + 1), l1)
            add(src, q_prime_index(i + 1, K), l2)
        else:
            dropped.append((state_label(src, K), l1 + l2))

        src = q_prime_index(i, K)
        add(src, q_index(i - 1), m2)
        if i < K:
            add(src, q_prime_index(i + 1, K), l1)
        else:
            dropped.append((state_label(src, K), l1))

    n = 2 * K + 1
    off = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    q = (off + sp.diags(diag)).tocsr()
    return GeneratorMatrix(K=K, q=q, dropped=dropped)


def solve_stationary(gen: GeneratorMatrix) -> OracleSolution:
    """
    Solve pi Q = 0, sum(pi) = 1 by replacing the last balance equation with
    the normalization row.
    """
    n = gen.dimension
    a = gen.q.transpose().tolil()
    a[n - 1, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[n - 1] = 1.0

    try:
        pi = spsolve(a.tocsc(), rhs)
    except (RuntimeError, ValueError) as e:
        raise SingularSystem(f"stationary solve failed for K={gen.K}: {e}") from e
    if not np.all(np.isfinite(pi)):
        raise SingularSystem(f"stationary solve produced non-finite values for K={gen.K}")

    boundary = float(pi[gen.K] + pi[2 * gen.K])
    flagged = boundary > TAIL_FLAG
    log.debug("oracle.solved", K=gen.K, boundary_mass=boundary, non_vanishing_tail=flagged)
    if flagged:
        log.warning("oracle.non_vanishing_tail", K=gen.K, boundary_mass=boundary)

    return OracleSolution(
        K=gen.K,
        probabilities=pi,
        boundary_mass=boundary,
        non_vanishing_tail=flagged,
    )


def oracle_stationary(params: ModelParams, K: Optional[int] = None) -> OracleSolution:
    return solve_stationary(build_generator(params, K or default_truncation(params)))


def oracle_expected_n(params: ModelParams, K: Optional[int] = None) -> float:
    """q_i holds i ordinary packets, q'_i holds i - 1."""
    sol = oracle_stationary(params, K)
    i = np.arange(1, sol.K + 1, dtype=float)
    return float(np.dot(i, sol.pi) + np.dot(i - 1.0, sol.pi_prime))
