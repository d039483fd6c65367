# aoi_priority/model.py
import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from aoi_priority.errors import InvalidConfig, InvalidRate

RATE_NAMES = ("lambda1", "lambda2", "mu1", "mu2")
MAX_SEED = 2**64 - 1


class ModelParams(BaseModel):
    """
    The four rates of the two-stream queue.

    lambda1 / mu1: ordinary stream (FCFS, preempted with resume)
    lambda2 / mu2: priority stream (preemptive, replaces itself)

    lambda2 = 0 is admitted as the single-stream limit; every other rate
    must be strictly positive.
    """

    model_config = ConfigDict(frozen=True)

    lambda1: float
    lambda2: float
    mu1: float
    mu2: float

    @field_validator("lambda1", "lambda2", "mu1", "mu2")
    @classmethod
    def _finite(cls, v: float, info) -> float:
        if not math.isfinite(v):
            raise ValueError(f"{info.field_name} must be finite, got {v}")
        if info.field_name == "lambda2":
            if v < 0:
                raise ValueError(f"lambda2 must be >= 0, got {v}")
        elif v <= 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v

    @classmethod
    def of(cls, lambda1: float, lambda2: float, mu1: float, mu2: float) -> "ModelParams":
        try:
            return cls(lambda1=lambda1, lambda2=lambda2, mu1=mu1, mu2=mu2)
        except ValidationError as e:
            raise InvalidRate(_first_message(e)) from e

    @classmethod
    def from_total(cls, lambda_: float, p1: float, mu1: float, mu2: float) -> "ModelParams":
        """One Poisson source of rate lambda_, each update ordinary with probability p1."""
        if not 0.0 < p1 <= 1.0:
            raise InvalidRate(f"p1 must lie in (0, 1], got {p1}")
        return cls.of(lambda_ * p1, lambda_ * (1.0 - p1), mu1, mu2)

    def with_rate(self, name: str, value: float) -> "ModelParams":
        if name not in RATE_NAMES:
            raise InvalidRate(f"Unknown rate '{name}', expected one of {RATE_NAMES}")
        values = self.model_dump()
        values[name] = value
        return ModelParams.of(**values)

    @property
    def lam(self) -> float:
        return self.lambda1 + self.lambda2

    @property
    def p1(self) -> float:
        return self.lambda1 / self.lam

    @property
    def p2(self) -> float:
        return self.lambda2 / self.lam


class SimMode(str, Enum):
    TRUE = "true"
    FICTITIOUS = "fictitious"


class PreemptionRule(str, Enum):
    RESUME = "resume"
    RESAMPLE = "resample"


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=1, ge=0, le=MAX_SEED)
    target_deliveries: int = Field(default=1_000_000, ge=1)
    warmup_deliveries: int = Field(default=1_000, ge=0)
    mode: SimMode = SimMode.TRUE
    preemption: PreemptionRule = PreemptionRule.RESUME

    @classmethod
    def build(cls, **kwargs) -> "SimConfig":
        try:
            return cls(**kwargs)
        except ValidationError as e:
            raise InvalidConfig(_first_message(e)) from e


def _first_message(e: ValidationError) -> str:
    err = e.errors()[0]
    loc = ".".join(str(p) for p in err.get("loc", ()))
    msg = err.get("msg", str(e))
    return f"{loc}: {msg}" if loc else msg

