"""Pacing schedules: decide per training step whether it is a class-prediction
(HCP) step or a plain token-prediction step.

Two shapes are supported. With fraction ``a``, probability ``b`` and total
steps ``N``:

* constant: probability b while t < a*N, then 0;
* linear:   probability b - b*t/(a*N) while t < a*N, then 0.

Step kinds are drawn from a counter-based generator keyed by (seed, t), so a
step's kind never depends on evaluation order or on checkpoint resume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .vocab import StepKind

KINDS = ("constant", "linear")


@dataclass(frozen=True)
class PacingSchedule:
    kind: str        # "constant" | "linear"
    a: float         # fraction of N during which HCP steps may occur
    b: float         # (initial) HCP probability
    total_steps: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"pacing kind must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 <= self.a <= 1.0:
            raise ConfigError(f"pacing a must be in [0, 1], got {self.a}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigError(f"pacing b must be in [0, 1], got {self.b}")
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")

    @property
    def cutoff(self) -> float:
        """a*N with float noise snapped away.

        0.2 * 100000 evaluates to 20000.000000000004 in binary floating
        point; left alone, the strict `t < a*N` boundary would admit one
        extra step. Products within 1e-9 (relative) of an integer snap to it.
        """
        x = self.a * self.total_steps
        r = round(x)
        if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
            return float(r)
        return x


def hcp_probability(schedule: PacingSchedule, t: int) -> float:
    """P(step t is an HCP step), per the schedule. t counts from 0."""
    if t < 0 or t >= schedule.total_steps:
        raise ValueError(f"step {t} outside [0, {schedule.total_steps})")
    cut = schedule.cutoff
    if t >= cut:
        return 0.0
    if schedule.kind == "constant":
        return schedule.b
    return schedule.b - schedule.b * t / cut


def _uniform(seed: int, t: int) -> float:
    """Deterministic uniform in [0, 1) from a Philox stream keyed by (seed, t)."""
    bits = np.random.Philox(key=np.array([seed, t], dtype=np.uint64)).random_raw()
    return float(bits) * 2.0 ** -64


def draw_step_kind(schedule: PacingSchedule, t: int) -> StepKind:
    """Sample the kind of step t; reproducible across runs and resumes."""
    p = hcp_probability(schedule, t)
    if p <= 0.0:
        return StepKind.TOKEN
    if p >= 1.0:
        return StepKind.HCP
    return StepKind.HCP if _uniform(schedule.seed, t) < p else StepKind.TOKEN


def draw_step_kinds(schedule: PacingSchedule, upto: int | None = None) -> list[StepKind]:
    """Kinds for steps [0, upto); equals per-step draw_step_kind calls."""
    n = schedule.total_steps if upto is None else upto
    return [draw_step_kind(schedule, t) for t in range(n)]


def expected_hcp_steps(schedule: PacingSchedule) -> float:
    """Expected number of HCP steps over the whole run.

    constant: a*b*N; linear: a*b*N/2 (area under the decay triangle).
    """
    if schedule.kind == "constant":
        return schedule.a * schedule.b * schedule.total_steps
    return schedule.a * schedule.b * schedule.total_steps / 2.0
