"""Piecewise-constant topology schedules.

A schedule is a list of segments ``(graph_id, design_id, duration)``.  In
``fixed`` mode there is one segment that lasts forever; ``cyclic`` repeats
the segment list with period equal to the summed durations; ``explicit``
plays the list once and then holds the last segment.  Intervals are
half-open, so the value at a switching instant comes from the new segment.
"""

import bisect
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidInput
from .structure import check_bounded_weights, verify_decomposition
from .synthesis import Mode, certify_design

MODES = ("fixed", "cyclic", "explicit")


class Segment(NamedTuple):
    graph_id: str
    design_id: str
    duration: float


@dataclass(frozen=True, eq=False)
class TopologySchedule:
    segments: tuple
    mode: str
    graphs: dict
    designs: dict
    bounds: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInput(f"unknown schedule mode {self.mode!r}")
        segs = tuple(Segment(*s) for s in self.segments)
        if not segs:
            raise InvalidInput("schedule has no segments")
        if self.mode == "fixed" and len(segs) != 1:
            raise InvalidInput("fixed schedule takes exactly one segment")
        for s in segs:
            if s.graph_id not in self.graphs:
                raise InvalidInput(f"unknown graph {s.graph_id!r}")
            if s.design_id not in self.designs:
                raise InvalidInput(f"unknown design {s.design_id!r}")
            if self.mode != "fixed" and not (s.duration > 0 and math.isfinite(s.duration)):
                raise InvalidInput(f"segment durations must be positive, got {s.duration}")
        shapes = {(g.n_agents, g.dim) for g in self.graphs.values()}
        shapes |= {(d.n_agents, d.dim) for d in self.designs.values()}
        if len(shapes) != 1:
            raise InvalidInput(f"graphs and designs disagree on (N, d): {sorted(shapes)}")
        thetas = [d.theta for d in self.designs.values()]
        if any(not np.array_equal(thetas[0], th) for th in thetas[1:]):
            raise InvalidInput("all designs must share the same theta")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "bounds", tuple(np.cumsum([0.0] + [s.duration for s in segs[:-1]])))

    @classmethod
    def fixed(cls, graph, design, graph_id="g", design_id=None):
        design_id = design_id or graph_id
        return cls(((graph_id, design_id, math.inf),), "fixed", {graph_id: graph}, {design_id: design})

    @property
    def period(self):
        return float(sum(s.duration for s in self.segments))

    @property
    def n_agents(self):
        return next(iter(self.graphs.values())).n_agents

    @property
    def dim(self):
        return next(iter(self.graphs.values())).dim

    @property
    def theta(self):
        return next(iter(self.designs.values())).theta

    @property
    def min_duration(self):
        return min(s.duration for s in self.segments)

    def segment_index(self, t):
        if t < 0:
            raise InvalidInput("schedule is defined for t >= 0")
        if self.mode == "fixed":
            return 0
        if self.mode == "cyclic":
            period = self.period
            cycles = math.floor(t / period + 1e-12)
            t = max(t - cycles * period, 0.0)
            # snap values a rounding error short of a boundary onto it
            return bisect.bisect_right(self.bounds, t + 1e-12 * period) - 1
        return bisect.bisect_right(self.bounds, t + 1e-12 * max(1.0, t)) - 1

    def at_time(self, t):
        """``(graph, design)`` active at time ``t``."""
        s = self.segments[self.segment_index(t)]
        return self.graphs[s.graph_id], self.designs[s.design_id]


def at_time(schedule, t):
    return schedule.at_time(t)


@dataclass
class ScheduleReport:
    mode: Mode
    designs: dict
    weight_bound: float
    weights_bounded: bool
    decompositions: dict

    @property
    def failing_segments(self):
        return [k for k, r in self.designs.items() if not r.passed]

    @property
    def passed(self):
        return (
            not self.failing_segments
            and self.weights_bounded
            and all(ok for ok, _ in self.decompositions.values())
        )

    def as_dict(self):
        return {
            "mode": self.mode.value,
            "designs": {k: r.as_dict() for k, r in self.designs.items()},
            "weight_bound": self.weight_bound,
            "weights_bounded": self.weights_bounded,
            "decompositions": {k: {"ok": ok, "diagnostics": diag} for k, (ok, diag) in self.decompositions.items()},
            "failing_segments": self.failing_segments,
            "passed": self.passed,
        }


def certify_schedule(schedule):
    """Certify every design the schedule uses.

    Switching schedules need ``L_B + L_B^T`` positive definite on every
    segment; a fixed schedule falls back to the Hurwitz certificate.  The
    weight bound and each segment's decomposition are checked as well.
    """
    mode = Mode.FIXED if schedule.mode == "fixed" else Mode.TIME_VARYING
    designs, decomps = {}, {}
    for seg in schedule.segments:
        if seg.design_id in designs:
            continue
        design = schedule.designs[seg.design_id]
        graph = schedule.graphs[seg.graph_id]
        designs[seg.design_id] = certify_design(design, mode)
        if design.decomposition is not None:
            decomps[seg.design_id] = verify_decomposition(graph, design.decomposition)
    bound, ok = check_bounded_weights(schedule)
    return ScheduleReport(mode, designs, bound, ok, decomps)
