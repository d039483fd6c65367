# aoi_priority/simulator.py
"""
Discrete-event simulation of the two-stream queue.

TRUE mode follows the protocol exactly. FICTITIOUS mode differs in one rule:
an ordinary arrival that finds state q'1 (a priority packet in service,
no ordinary packet in the system) discards the priority packet and enters
service at once.
"""

import json
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, List, Optional, TextIO, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats

from aoi_priority.analytic import StationaryDistribution
from aoi_priority.log import get_logger
from aoi_priority.model import ModelParams, PreemptionRule, SimConfig, SimMode
from aoi_priority.rng import ARRIVALS_1, ARRIVALS_2, SERVICE, substream

log = get_logger(__name__)

INF = math.inf

BATCHES = 20
ALPHA = 0.05  # batch-means interval is 100*(1-ALPHA) percent


class Serving(str, Enum):
    IDLE = "idle"
    ORDINARY = "ordinary"
    PRIORITY = "priority"


class EventKind(str, Enum):
    ARRIVAL_1 = "arrival1"
    ARRIVAL_2 = "arrival2"
    COMPLETION = "completion"


@dataclass
class SimState:
    clock: float = 0.0
    u1_queue: Deque[float] = field(default_factory=deque)
    u1_remaining: Optional[float] = None
    serving: Serving = Serving.IDLE
    u2_gen_time: Optional[float] = None
    service_end: float = INF
    next_arrival_1: float = INF
    next_arrival_2: float = INF
    last_delivered_gen_1: float = 0.0
    last_delivered_gen_2: float = 0.0
    last_delivery_1: float = 0.0
    deliveries_1: int = 0

    # measurement window; integrals are flushed up to the mark times
    measuring: bool = False
    window_start: float = 0.0
    mark_1: float = 0.0
    mark_2: float = 0.0
    mark_n: float = 0.0
    batch_marks: List[Tuple[float, float]] = field(default_factory=list)
    observed: int = 0
    age_integral_1: float = 0.0
    age_integral_2: float = 0.0
    n_integral: float = 0.0
    peak_sum: float = 0.0
    z_sum: float = 0.0
    z_sq_sum: float = 0.0
    system_time_sum: float = 0.0
    occupancy_time: Dict[int, float] = field(default_factory=dict)
    races: Dict[str, int] = field(default_factory=lambda: {"a": 0, "b": 0, "u": 0, "v": 0})
    priority_deliveries: int = 0
    priority_discards: int = 0
    events: int = 0

    def chain_state(self) -> int:
        """q_i -> i, q'_i -> -i, q0 -> 0."""
        n = len(self.u1_queue)
        if self.serving is Serving.PRIORITY:
            return -(n + 1)
        return n if self.serving is Serving.ORDINARY else 0


class SimResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: SimMode
    seed: int
    avg_age_1: float
    age_1_halfwidth: Optional[float]
    avg_peak_1: float
    avg_age_2: Optional[float]
    time_avg_n: float
    occupancy: Dict[str, float]
    z_mean: float
    z_m2: float
    mean_system_time_1: float
    race_frequencies: Dict[str, Optional[float]]
    priority_deliveries: int
    priority_discards: int
    deliveries_observed: int
    sim_time: float
    events: int

    @property
    def throughput_1(self) -> float:
        return self.deliveries_observed / self.sim_time


class OccupancyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    deviations: Dict[str, float]
    max_deviation: float
    empirical_q0: float
    converged: bool
    note: str = ""


def state_label(code: int) -> str:
    return f"q'{-code}" if code < 0 else f"q{code}"


# =========================================================
# Event loop
# =========================================================

class _Simulation:
    def __init__(self, params: ModelParams, config: SimConfig, event_log: Optional[TextIO]):
        self.p = params
        self.cfg = config
        self.event_log = event_log
        self.fictitious = config.mode is SimMode.FICTITIOUS
        self.resume = config.preemption is PreemptionRule.RESUME

        self.arr1 = substream(config.seed, ARRIVALS_1)
        self.arr2 = substream(config.seed, ARRIVALS_2)
        self.svc = substream(config.seed, SERVICE)

        self.s = SimState()
        self.s.next_arrival_1 = self.arr1.draw(params.lambda1)
        if params.lambda2 > 0.0:
            self.s.next_arrival_2 = self.arr2.draw(params.lambda2)
        self.batch_size = max(1, config.target_deliveries // BATCHES)
        if config.warmup_deliveries == 0:
            self.s.measuring = True

        self._handlers = {
            EventKind.ARRIVAL_1: self._on_arrival_1,
            EventKind.ARRIVAL_2: self._on_arrival_2,
            EventKind.COMPLETION: self._on_completion,
        }

    # -----------------------------
    # service starts
    # -----------------------------
    def _start_ordinary(self) -> None:
        s = self.s
        if s.u1_remaining is None:
            s.u1_remaining = self.svc.draw(self.p.mu1)
        s.serving = Serving.ORDINARY
        s.service_end = s.clock + s.u1_remaining

    def _start_priority(self) -> None:
        s = self.s
        s.serving = Serving.PRIORITY
        s.u2_gen_time = s.clock
        s.service_end = s.clock + self.svc.draw(self.p.mu2)

    # -----------------------------
    # integrals
    # -----------------------------
    def _flush_age_1(self) -> None:
        s = self.s
        if s.measuring:
            g = s.last_delivered_gen_1
            s.age_integral_1 += (s.clock - s.mark_1) * ((s.mark_1 - g) + (s.clock - g)) * 0.5
        s.mark_1 = s.clock

    def _flush_age_2(self) -> None:
        s = self.s
        if s.measuring:
            g = s.last_delivered_gen_2
            s.age_integral_2 += (s.clock - s.mark_2) * ((s.mark_2 - g) + (s.clock - g)) * 0.5
        s.mark_2 = s.clock

    def _flush_n(self) -> None:
        s = self.s
        if s.measuring:
            s.n_integral += (s.clock - s.mark_n) * len(s.u1_queue)
        s.mark_n = s.clock

    def _start_measuring(self) -> None:
        s = self.s
        s.measuring = True
        s.window_start = s.clock
        s.mark_1 = s.mark_2 = s.mark_n = s.clock

    # -----------------------------
    # handlers
    # -----------------------------
    def _on_arrival_1(self) -> Optional[dict]:
        s = self.s
        finds_q1_prime = s.serving is Serving.PRIORITY and not s.u1_queue
        self._flush_n()
        s.u1_queue.append(s.clock)

        if self.fictitious and finds_q1_prime:
            s.priority_discards += 1
            s.u2_gen_time = None
            self._start_ordinary()
        elif s.serving is Serving.IDLE:
            self._start_ordinary()

        s.next_arrival_1 = s.clock + self.arr1.draw(self.p.lambda1)
        return None

    def _on_arrival_2(self) -> Optional[dict]:
        s = self.s
        if s.serving is Serving.PRIORITY:
            s.priority_discards += 1
        elif s.serving is Serving.ORDINARY:
            # the head stays at the front of the buffer
            s.u1_remaining = s.service_end - s.clock if self.resume else None
        self._start_priority()
        s.next_arrival_2 = s.clock + self.arr2.draw(self.p.lambda2)
        return None

    def _on_completion(self) -> Optional[dict]:
        s = self.s
        if s.serving is Serving.PRIORITY:
            self._flush_age_2()
            s.last_delivered_gen_2 = s.u2_gen_time
            s.u2_gen_time = None
            if s.measuring:
                s.priority_deliveries += 1
            self._next_or_idle()
            return None

        self._flush_age_1()
        self._flush_n()
        gen = s.u1_queue.popleft()
        prev_gen = s.last_delivered_gen_1
        record = {
            "gen": gen,
            "peak": s.clock - prev_gen,
            "interarrival": gen - prev_gen,
            "system_time": s.clock - gen,
            "z": s.clock - max(s.last_delivery_1, gen),
        }
        if s.measuring:
            s.observed += 1
            s.peak_sum += record["peak"]
            s.z_sum += record["z"]
            s.z_sq_sum += record["z"] ** 2
            s.system_time_sum += record["system_time"]
            if s.observed % self.batch_size == 0:
                s.batch_marks.append((s.age_integral_1, s.clock))

        s.last_delivered_gen_1 = gen
        s.last_delivery_1 = s.clock
        s.deliveries_1 += 1
        s.u1_remaining = None
        self._next_or_idle()

        if not s.measuring and s.deliveries_1 == self.cfg.warmup_deliveries:
            self._start_measuring()
        return record

    def _next_or_idle(self) -> None:
        s = self.s
        if s.u1_queue:
            self._start_ordinary()
        else:
            s.serving = Serving.IDLE
            s.service_end = INF

    # -----------------------------
    # main loop
    # -----------------------------
    def _count_race(self, kind: EventKind) -> None:
        s = self.s
        if s.serving is Serving.ORDINARY:
            if kind is EventKind.COMPLETION:
                s.races["a"] += 1
            elif kind is EventKind.ARRIVAL_2:
                s.races["v"] += 1
        elif s.serving is Serving.PRIORITY:
            if kind is EventKind.COMPLETION:
                s.races["u"] += 1
            elif kind is EventKind.ARRIVAL_2:
                s.races["b"] += 1

    def run(self, max_events: Optional[int]) -> SimResult:
        s = self.s
        target = self.cfg.target_deliveries
        handlers = self._handlers
        occupancy = s.occupancy_time

        while s.observed < target:
            if max_events is not None and s.events >= max_events:
                break

            # ties: completion > priority arrival > ordinary arrival
            t, kind = s.service_end, EventKind.COMPLETION
            if s.next_arrival_2 < t:
                t, kind = s.next_arrival_2, EventKind.ARRIVAL_2
            if s.next_arrival_1 < t:
                t, kind = s.next_arrival_1, EventKind.ARRIVAL_1

            if s.measuring:
                if t > s.clock:
                    code = s.chain_state()
                    occupancy[code] = occupancy.get(code, 0.0) + (t - s.clock)
                self._count_race(kind)
            s.clock = t
            s.events += 1

            record = handlers[kind]()
            if self.event_log is not None:
                self._log_event(kind, record)

        self._flush_age_1()
        self._flush_age_2()
        self._flush_n()
        return self._result()

    def _log_event(self, kind: EventKind, record: Optional[dict]) -> None:
        s = self.s
        entry = {
            "time": s.clock,
            "kind": kind.value,
            "state": state_label(s.chain_state()),
            "n1": len(s.u1_queue),
        }
        if record is not None:
            entry.update(record)
        self.event_log.write(json.dumps(entry) + "\n")

    def _age_1_halfwidth(self) -> Optional[float]:
        """Batch-means confidence half-width of the ordinary average age."""
        marks = self.s.batch_marks
        if len(marks) < 2:
            return None
        ends = np.array([(0.0, self.s.window_start)] + marks)
        integrals = np.diff(ends[:, 0])
        spans = np.diff(ends[:, 1])
        means = integrals / spans
        b = len(means)
        return float(np.std(means, ddof=1) * stats.t.ppf(1.0 - ALPHA / 2.0, b - 1) / math.sqrt(b))

    def _result(self) -> SimResult:
        s = self.s
        span = s.clock - s.window_start if s.measuring else 0.0
        n = s.observed

        def per_time(x: float) -> float:
            return x / span if span > 0.0 else math.nan

        def per_delivery(x: float) -> float:
            return x / n if n > 0 else math.nan

        occ_total = sum(s.occupancy_time.values())
        occupancy = {
            state_label(code): t / occ_total
            for code, t in sorted(s.occupancy_time.items(), key=lambda kv: (kv[0] < 0, abs(kv[0])))
        } if occ_total > 0.0 else {}

        def freq(x: str, y: str) -> Optional[float]:
            total = s.races[x] + s.races[y]
            return s.races[x] / total if total else None

        return SimResult(
            mode=self.cfg.mode,
            seed=self.cfg.seed,
            avg_age_1=per_time(s.age_integral_1),
            age_1_halfwidth=self._age_1_halfwidth(),
            avg_peak_1=per_delivery(s.peak_sum),
            avg_age_2=per_time(s.age_integral_2) if self.p.lambda2 > 0.0 else None,
            time_avg_n=per_time(s.n_integral),
            occupancy=occupancy,
            z_mean=per_delivery(s.z_sum),
            z_m2=per_delivery(s.z_sq_sum),
            mean_system_time_1=per_delivery(s.system_time_sum),
            race_frequencies={
                "a": freq("a", "v"), "v": freq("v", "a"),
                "u": freq("u", "b"), "b": freq("b", "u"),
            },
            priority_deliveries=s.priority_deliveries,
            priority_discards=s.priority_discards,
            deliveries_observed=n,
            sim_time=span,
            events=s.events,
        )


def run(params: ModelParams, config: SimConfig,
        event_log: Optional[TextIO] = None,
        max_events: Optional[int] = None) -> SimResult:
    """
    Simulate until config.target_deliveries ordinary deliveries have been
    observed after config.warmup_deliveries discarded ones.

    Instability is not checked: an unstable run still terminates (ordinary
    packets keep being delivered) but its averages do not settle.
    """
    log.info(
        "sim.started",
        mode=config.mode.value,
        seed=config.seed,
        deliveries=config.target_deliveries,
        warmup=config.warmup_deliveries,
        preemption=config.preemption.value,
    )
    result = _Simulation(params, config, event_log).run(max_events)
    log.info(
        "sim.finished",
        mode=config.mode.value,
        seed=config.seed,
        deliveries=result.deliveries_observed,
        sim_time=result.sim_time,
        events=result.events,
    )
    return result


def occupancy_check(result: SimResult, dist: Optional[StationaryDistribution],
                    n_states: int = 5, tol: float = 0.01) -> OccupancyReport:
    """
    Compare empirical state-time fractions with the stationary law over
    q0, q1..q_n, q'1..q'_n. Without a stationary law (unstable parameters)
    the report is flagged as not converged.
    """
    empirical_q0 = result.occupancy.get("q0", 0.0)
    if dist is None:
        return OccupancyReport(
            deviations={},
            max_deviation=math.inf,
            empirical_q0=empirical_q0,
            converged=False,
            note="no stationary distribution (unstable parameters)",
        )

    expected = {"q0": dist.pi0}
    for i, (p, q) in enumerate(dist.ladder[:n_states], start=1):
        expected[f"q{i}"] = p
        expected[f"q'{i}"] = q

    deviations = {
        label: abs(result.occupancy.get(label, 0.0) - value)
        for label, value in expected.items()
    }
    worst = max(deviations.values())
    return OccupancyReport(
        deviations=deviations,
        max_deviation=worst,
        empirical_q0=empirical_q0,
        converged=worst < tol,
    )
