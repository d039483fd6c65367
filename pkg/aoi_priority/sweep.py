# aoi_priority/sweep.py
"""
Single-point analysis and parameter sweeps (one CSV row per grid point).
"""

import math
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from aoi_priority import age, analytic
from aoi_priority.errors import InvalidConfig, InvalidRate, UnstableSystem
from aoi_priority.log import get_logger
from aoi_priority.model import RATE_NAMES, ModelParams, SimConfig
from aoi_priority.rng import mix
from aoi_priority.simulator import run

log = get_logger(__name__)

COLUMNS = (
    "swept_value",
    "margin",
    "pi0",
    "e_n",
    "peak_age_1",
    "age_lb_1",
    "age_u2",
    "age_ref",
    "sim_age_1",
    "sim_peak_1",
    "sim_age_2",
    "sim_e_n",
    "seed",
    "deliveries",
    "stable",
)

# flag name -> model field
SWEEP_NAMES = {"l1": "lambda1", "l2": "lambda2", "m1": "mu1", "m2": "mu2"}

# below this margin / mu1 the warm-up starts to grow
WARMUP_MARGIN_FRACTION = 0.2


# =========================================================
# Single point
# =========================================================

def analyze_point(params: ModelParams) -> Dict[str, Optional[float]]:
    """
    Every closed-form quantity for one parameter point. Stable-only
    quantities are None when the point is unstable (or too close to the
    boundary); 'stable' says which.
    """
    report = analytic.check_stability(params)
    out: Dict[str, Optional[float]] = {
        "margin": report.margin,
        "stable": report.is_stable,
        "pi0": None,
        "e_n": None,
        "peak_age_1": None,
        "age_lb_1": None,
        "age_u2": None,
        "age_ref": None,
        "mean_z": None,
        "rho": None,
        "alpha1": None,
        "alpha2": None,
    }

    if params.lambda2 > 0.0:
        out["age_u2"] = analytic.priority_age(params)
    if params.lambda1 < params.mu1:
        out["age_ref"] = analytic.reference_mm1_age(params.lambda1, params.mu1)

    if report.is_stable:
        try:
            lb = age.system_time_lb(params)
            out.update(
                pi0=report.pi0,
                e_n=analytic.expected_queue_length(params),
                peak_age_1=analytic.peak_age_ordinary(params),
                age_lb_1=age.age_lower_bound(params),
                mean_z=age.virtual_service_moments(params).mean_Z,
                rho=lb.rho,
                alpha1=lb.alpha1,
                alpha2=lb.alpha2,
            )
        except UnstableSystem as e:
            # near-boundary refusal: keep the row, drop the closed forms
            log.warning("analysis.refused", reason=str(e))
            out["stable"] = False
    return out


def scaled_warmup(params: ModelParams, margin: float, base: int) -> int:
    """
    Warm-up grows like mu1 / margin so that points near the stability
    boundary start measuring from a settled queue.
    """
    if margin <= 0.0:
        return base
    return max(base, math.ceil(base * params.mu1 / margin * WARMUP_MARGIN_FRACTION))


# =========================================================
# Sweep
# =========================================================

class SweepSpec(BaseModel):
    """
    fixed:  the three rates that do not move (keys from RATE_NAMES)
    swept:  the moving rate
    sim:    per-point simulation settings; None disables simulation.
            Each point uses seed mix(sim.seed, point_index).
    """

    model_config = ConfigDict(frozen=True)

    fixed: Dict[str, float]
    swept: str
    start: float
    stop: float
    points: int
    sim: Optional[SimConfig] = None
    out: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "SweepSpec":
        if self.swept not in RATE_NAMES:
            raise ValueError(f"swept must be one of {RATE_NAMES}, got '{self.swept}'")
        expected = set(RATE_NAMES) - {self.swept}
        if set(self.fixed) != expected:
            raise ValueError(f"fixed rates must be exactly {sorted(expected)}, got {sorted(self.fixed)}")
        if self.points < 1:
            raise ValueError(f"points must be >= 1, got {self.points}")
        if self.points == 1 and self.start != self.stop:
            raise ValueError("a single-point grid needs start == stop")
        if self.points > 1 and not self.start < self.stop:
            raise ValueError(f"grid must be strictly increasing: {self.start} .. {self.stop}")
        return self

    @classmethod
    def build(cls, **kwargs) -> "SweepSpec":
        try:
            spec = cls(**kwargs)
        except ValueError as e:
            raise InvalidConfig(str(e)) from e
        for value in spec.grid():
            try:
                spec.params_at(value)
            except InvalidRate as e:
                raise InvalidConfig(f"grid point {spec.swept}={value}: {e}") from e
        return spec

    def grid(self) -> List[float]:
        return np.linspace(self.start, self.stop, self.points).tolist()

    def params_at(self, value: float) -> ModelParams:
        return ModelParams.of(**{**self.fixed, self.swept: value})


def sweep_point(spec: SweepSpec, index: int, value: float) -> Dict[str, object]:
    params = spec.params_at(value)
    closed = analyze_point(params)
    row: Dict[str, object] = {c: closed.get(c) for c in COLUMNS}
    row["sim_age_1_halfwidth"] = None
    row["swept_value"] = value

    if spec.sim is not None and closed["stable"]:
        seed = mix(spec.sim.seed, index)
        warmup = scaled_warmup(params, closed["margin"], spec.sim.warmup_deliveries)
        cfg = spec.sim.model_copy(update={"seed": seed, "warmup_deliveries": warmup})
        res = run(params, cfg)
        row.update(
            sim_age_1=res.avg_age_1,
            sim_age_1_halfwidth=res.age_1_halfwidth,
            sim_peak_1=res.avg_peak_1,
            sim_age_2=res.avg_age_2,
            sim_e_n=res.time_avg_n,
            seed=seed,
            deliveries=res.deliveries_observed,
        )

    log.info("sweep.point", index=index, value=value, stable=closed["stable"])
    return row


def _sweep_point_args(args) -> Dict[str, object]:
    return sweep_point(*args)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> List[Dict[str, object]]:
    """Rows come back in grid order whatever the completion order."""
    tasks = [(spec, i, v) for i, v in enumerate(spec.grid())]
    if jobs <= 1:
        return [sweep_point(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point_args, tasks))


# =========================================================
# Curve features
# =========================================================

def _column(rows: Sequence[Dict[str, object]], name: str) -> List[Optional[float]]:
    return [r.get(name) for r in rows]


def crossing_point(rows: Sequence[Dict[str, object]], a: str, b: str) -> Optional[float]:
    """
    Swept value where a - b first changes sign, by linear interpolation
    between neighbouring grid points. None when the curves never cross.
    """
    xs = _column(rows, "swept_value")
    diff = [
        (x, ya - yb)
        for x, ya, yb in zip(xs, _column(rows, a), _column(rows, b))
        if ya is not None and yb is not None
    ]
    for (x0, d0), (x1, d1) in zip(diff, diff[1:]):
        if d0 == 0.0:
            return x0
        if d0 * d1 < 0.0:
            return x0 + (x1 - x0) * d0 / (d0 - d1)
    return None


def ratio_at(rows: Sequence[Dict[str, object]], value: float, a: str, b: str) -> Optional[float]:
    """a / b at the grid point nearest to value."""
    if not rows:
        return None
    row = min(rows, key=lambda r: abs(r["swept_value"] - value))
    ya, yb = row.get(a), row.get(b)
    if ya is None or yb is None or yb == 0.0:
        return None
    return ya / yb


def is_strictly_monotone(values: Sequence[Optional[float]], increasing: bool = True) -> bool:
    vals = [v for v in values if v is not None]
    pairs = zip(vals, vals[1:])
    if increasing:
        return all(y > x for x, y in pairs)
    return all(y < x for x, y in pairs)
