"""Piecewise-affine electrostatic potentials on a finite device domain.

Potentials are stored in volts on [0, L] nm as an ordered list of affine
segments.  The Hamiltonian couples through -q*V(x), so with the double
barrier preset's negative barrier offset the electrons see potential
energy barriers (see the preset docstring).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass


class OrderingViolation(ValueError):
    """Breakpoints are not strictly increasing."""


class OutOfDomain(ValueError):
    """Evaluation point lies outside [0, L]."""


@dataclass(frozen=True)
class Segment:
    """Affine piece V(x) = v0 + slope*(x - x_lo) on [x_lo, x_hi)."""

    x_lo: float
    x_hi: float
    v0: float
    slope: float

    def value(self, x: float) -> float:
        return self.v0 + self.slope * (x - self.x_lo)


@dataclass(frozen=True)
class PiecewisePotential:
    """Piecewise-affine potential tiling [0, L] with left-closed segments.

    The last segment also owns its right endpoint so evaluation is defined
    on the whole closed interval.
    """

    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise OrderingViolation("potential needs at least one segment")
        if self.segments[0].x_lo != 0.0:
            raise OrderingViolation("first segment must start at x = 0")
        for a, b in zip(self.segments, self.segments[1:]):
            if a.x_hi != b.x_lo:
                raise OrderingViolation("segments must tile the domain without gaps")
        for seg in self.segments:
            if not seg.x_hi > seg.x_lo:
                raise OrderingViolation("segment breakpoints must be strictly increasing")

    @property
    def domain_length(self) -> float:
        return self.segments[-1].x_hi

    @property
    def left_value(self) -> float:
        return self.segments[0].value(0.0)

    @property
    def right_value(self) -> float:
        return self.segments[-1].value(self.domain_length)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(s.x_lo for s in self.segments) + (self.domain_length,)

    def segment_at(self, x: float) -> Segment:
        if x < 0.0 or x > self.domain_length:
            raise OutOfDomain(f"x = {x} outside [0, {self.domain_length}]")
        lows = [s.x_lo for s in self.segments]
        i = bisect.bisect_right(lows, x) - 1
        if i == len(self.segments):
            i -= 1
        return self.segments[min(i, len(self.segments) - 1)]

    def eval(self, x: float) -> float:
        """Potential in volts at x (nm); boundary x = L maps to the last segment."""
        return self.segment_at(x).value(x)


def constant_potential(length: float, value: float = 0.0) -> PiecewisePotential:
    return PiecewisePotential((Segment(0.0, length, value, 0.0),))


def from_breakpoints(points: list[float], values: list[float], slopes: list[float]) -> PiecewisePotential:
    """Build a potential from segment start points, values there, and slopes.

    points must start at 0 and end at L (one more entry than values/slopes).
    """
    if len(points) != len(values) + 1 or len(values) != len(slopes):
        raise OrderingViolation("need n+1 breakpoints for n segments")
    segs = []
    for i, (v, m) in enumerate(zip(values, slopes)):
        if not points[i + 1] > points[i]:
            raise OrderingViolation("breakpoints must be strictly increasing")
        segs.append(Segment(points[i], points[i + 1], v, m))
    return PiecewisePotential(tuple(segs))


def rtd_potential(
    a1: float,
    a2: float,
    a3: float,
    a4: float,
    a5: float,
    a6: float,
    length: float,
    v_bias: float,
    v_barrier: float,
) -> PiecewisePotential:
    """Double-barrier-plus-ramp potential of a biased resonant tunneling diode.

    V = 0 before a1; a linear ramp from 0 to v_bias across [a1, a6], with
    v_barrier added on the two barrier windows (a2, a3) and (a4, a5); and
    V = v_bias after a6.  All positions in nm, potentials in volts.  With
    v_barrier < 0 the Hamiltonian term -q*V makes those windows potential
    energy barriers of height |v_barrier|.
    """
    pts = [0.0, a1, a2, a3, a4, a5, a6, length]
    for lo, hi in zip(pts, pts[1:]):
        if not hi > lo:
            raise OrderingViolation(f"breakpoints must increase strictly: {lo} >= {hi}")
    slope = v_bias / (a6 - a1)

    def ramp(x: float) -> float:
        return (x - a1) * slope

    segs = (
        Segment(0.0, a1, 0.0, 0.0),
        Segment(a1, a2, 0.0, slope),
        Segment(a2, a3, ramp(a2) + v_barrier, slope),
        Segment(a3, a4, ramp(a3), slope),
        Segment(a4, a5, ramp(a4) + v_barrier, slope),
        Segment(a5, a6, ramp(a5), slope),
        Segment(a6, length, v_bias, 0.0),
    )
    return PiecewisePotential(segs)


def paper_rtd_potential(v_bias: float = 0.1, v_barrier: float = -0.3) -> PiecewisePotential:
    """The reference RTD geometry: a1..a6 = 50,60,65,70,75,85 nm, L = 135 nm."""
    return rtd_potential(50.0, 60.0, 65.0, 70.0, 75.0, 85.0, 135.0, v_bias, v_barrier)
