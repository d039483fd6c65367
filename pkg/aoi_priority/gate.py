# aoi_priority/gate.py

from aoi_priority.errors import InvalidRate, NearBoundary, UnstableSystem
from aoi_priority.model import ModelParams

# margin / mu1 below this is refused by every closed form
NEAR_BOUNDARY_RTOL = 1e-9


def stability_margin(params: ModelParams) -> float:
    return params.mu1 - params.lambda1 * (1.0 + params.lambda2 / params.mu2)


def require_stable(params: ModelParams) -> float:
    """
    Gate for every stable-only formula. Returns the margin.

    Rules:
    - margin <= 0          -> UnstableSystem
    - margin/mu1 < 1e-9    -> NearBoundary
    """
    margin = stability_margin(params)
    if margin <= 0.0:
        raise UnstableSystem(
            f"Unstable: margin mu1 - lambda1(1 + lambda2/mu2) = {margin!r} <= 0 "
            f"for {params.model_dump()}"
        )
    if margin / params.mu1 < NEAR_BOUNDARY_RTOL:
        raise NearBoundary(
            f"Margin {margin!r} is within {NEAR_BOUNDARY_RTOL} of the stability "
            "boundary; closed forms would be cancelled out"
        )
    return margin


def require_positive(name: str, value: float) -> None:
    if not value > 0.0:
        raise InvalidRate(f"{name} must be > 0, got {value}")
