"""Longitudinal vehicle kinematics along a closed route.

Speed limits are enforced as braking envelopes: to be at speed ``v_c`` by a
point ``d`` ahead, the end-of-tick speed ``v'`` must satisfy
``v'^2 <= v_c^2 + 2 b d'`` where ``d' = d - (v + v') dt / 2`` is the
remaining distance after a trapezoidal step. Solving the quadratic gives the
largest admissible ``v'``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace

from .protocol import Drive
from .world import Direction, Intersection, Position, Route, World

SNAP_FT = 0.5
SNAP_SPEED = 1.0
_EPS = 1e-6


@dataclass(frozen=True)
class KinParams:
    target_speed: float = 14.667  # 10 mph
    accel: float = 5.0
    decel: float = 8.0
    corner_speed: float = 7.0
    corner_zone: float = 10.0
    queue_spacing: float = 20.0

    def __post_init__(self) -> None:
        for name in ("target_speed", "accel", "decel", "corner_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"kinematics.{name} must be > 0")
        if self.corner_zone < 0 or self.queue_spacing < 0:
            raise ValueError("kinematics.corner_zone and queue_spacing must be >= 0")


@dataclass(frozen=True)
class TrackStop:
    center: float  # offset of the intersection center along the track
    intersection: Intersection
    entry: Direction

    @property
    def stop_line(self) -> float:
        return self.center - self.intersection.box_half_width


class Track:
    """A route traversed in one sense, indexed by distance from its first waypoint."""

    def __init__(self, route: Route, world: World, clockwise: bool):
        self.route = route.oriented(clockwise)
        self.clockwise = clockwise
        pts = self.route.waypoints
        n = len(pts)
        self.starts = []
        acc = 0.0
        for i in range(n):
            self.starts.append(acc)
            acc += pts[i].dist(pts[(i + 1) % n])
        self.length = acc
        self.dirs = self.route.directions
        self.corners = [self.starts[i] for i in range(n) if self.dirs[i - 1] != self.dirs[i]]
        stops = []
        for inter in world.intersections:
            off = self.offset_of(inter.center)
            if off is not None:
                stops.append(TrackStop(off, inter, self.direction_into(off)))
        self.stops = sorted(stops, key=lambda s: s.center)

    def segment(self, progress: float) -> int:
        return bisect.bisect_right(self.starts, progress % self.length) - 1

    def position(self, progress: float) -> Position:
        p = progress % self.length
        i = bisect.bisect_right(self.starts, p) - 1
        a = self.route.waypoints[i]
        ux, uy = self.dirs[i].unit
        t = p - self.starts[i]
        return Position(a.x + ux * t, a.y + uy * t)

    def heading(self, progress: float) -> Direction:
        return self.dirs[self.segment(progress)]

    def direction_into(self, progress: float) -> Direction:
        """Direction of travel when arriving at ``progress``."""
        p = progress % self.length
        i = bisect.bisect_right(self.starts, p) - 1
        if abs(p - self.starts[i]) < _EPS:
            i -= 1
        return self.dirs[i]

    def offset_of(self, pos: Position) -> float | None:
        pts = self.route.waypoints
        n = len(pts)
        for i in range(n):
            a, b = pts[i], pts[(i + 1) % n]
            if min(a.x, b.x) - _EPS <= pos.x <= max(a.x, b.x) + _EPS and \
                    min(a.y, b.y) - _EPS <= pos.y <= max(a.y, b.y) + _EPS:
                return self.starts[i] + a.dist(pos)
        return None

    def ahead(self, frm: float, to: float) -> float:
        """Forward distance from ``frm`` to ``to`` around the loop, in [0, L)."""
        d = (to - frm) % self.length
        return 0.0 if d > self.length - _EPS else d

    def box_at(self, progress: float) -> TrackStop | None:
        """The stop whose box contains ``progress`` (past the stop line)."""
        for s in self.stops:
            hw = s.intersection.box_half_width
            back = self.ahead(s.center - hw, progress)
            if 0.0 < back < 2 * hw:
                return s
        return None

    def next_stop(self, progress: float) -> tuple[TrackStop | None, float]:
        """Next stop line at or ahead of ``progress`` and the distance to it."""
        best, best_d = None, math.inf
        for s in self.stops:
            d = self.ahead(progress, s.stop_line)
            if d < best_d:
                best, best_d = s, d
        return best, best_d


@dataclass(frozen=True)
class VehicleKin:
    id: int
    track: Track
    progress: float
    speed: float
    odometer: float = 0.0
    params: KinParams = KinParams()

    @property
    def position(self) -> Position:
        return self.track.position(self.progress)

    @property
    def heading(self) -> Direction:
        return self.track.heading(self.progress)


def braking_distance(speed: float, decel: float) -> float:
    return speed * speed / (2.0 * decel)


def envelope_speed(v: float, dist: float, v_end: float, decel: float, dt: float) -> float:
    """Largest end-of-tick speed that can still slow to ``v_end`` within ``dist``."""
    bdt = decel * dt
    c = v_end * v_end + 2.0 * decel * dist - bdt * v
    if c <= 0.0:
        return 0.0
    return 0.5 * (-bdt + math.sqrt(bdt * bdt + 4.0 * c))


def advance_kinematics(v: VehicleKin, cmd: Drive, dt: float,
                       queue_gap: float | None = None) -> VehicleKin:
    """One fixed step. ``queue_gap`` is the distance to the next vehicle ahead in lane."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    p = v.params
    track = v.track
    speed = v.speed
    limit = min(speed + p.accel * dt, p.target_speed)

    for c in track.corners:
        zone_start = track.ahead(c - p.corner_zone, v.progress)
        if zone_start < 2 * p.corner_zone:
            limit = min(limit, p.corner_speed)
        else:
            d = track.ahead(v.progress, c - p.corner_zone)
            limit = min(limit, envelope_speed(speed, d, p.corner_speed, p.decel, dt))

    stop_d = math.inf
    if cmd is Drive.STOP_AT_LINE:
        _, stop_d = track.next_stop(v.progress)
        limit = min(limit, envelope_speed(speed, stop_d, 0.0, p.decel, dt))
    queue_d = math.inf
    if queue_gap is not None:
        queue_d = max(0.0, queue_gap - p.queue_spacing)
        limit = min(limit, envelope_speed(speed, queue_d, 0.0, p.decel, dt))

    new_speed = max(0.0, limit)
    step = 0.5 * (speed + new_speed) * dt
    if step >= stop_d - _EPS or (stop_d - step <= SNAP_FT and new_speed <= SNAP_SPEED):
        step, new_speed = stop_d, 0.0
    if step > queue_d:
        step, new_speed = queue_d, 0.0
    return replace(v, progress=(v.progress + step) % track.length, speed=new_speed,
                   odometer=v.odometer + step)
