"""Planar intersection geometry.

Coordinates are local planar feet: x east, y north. Directions name the
direction of *travel*, so the ``N`` approach of an intersection carries
northbound traffic and its stop line lies south of the center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

AXIS_TOL_FT = 0.5
DEFAULT_BOX_HALF_WIDTH = 15.0


class WorldError(ValueError):
    """Geometry precondition violated."""


class Direction(IntEnum):
    # value doubles as the SPaT green_mask bit index
    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def unit(self) -> tuple[float, float]:
        return _UNIT[self]

    @property
    def heading_deg(self) -> float:
        return 90.0 * self.value

    @property
    def bit(self) -> int:
        return 1 << self.value

    @property
    def axis_mask(self) -> int:
        """Mask with this direction and its opposite."""
        return self.bit | Direction((self.value + 2) % 4).bit

    @property
    def opposite(self) -> Direction:
        return Direction((self.value + 2) % 4)

    @property
    def right_of(self) -> Direction:
        """Travel direction of a vehicle arriving from this vehicle's right."""
        return Direction((self.value - 1) % 4)

    def is_orthogonal(self, other: Direction) -> bool:
        return (self.value - other.value) % 2 == 1

    @classmethod
    def from_heading(cls, heading_deg: float) -> Direction:
        return cls(int(round((heading_deg % 360.0) / 90.0)) % 4)

    @classmethod
    def from_delta(cls, dx: float, dy: float) -> Direction:
        if dx != 0.0 and dy != 0.0:
            raise WorldError(f"segment ({dx}, {dy}) is not axis-aligned")
        if dx == 0.0 and dy == 0.0:
            raise WorldError("zero-length segment")
        if dx > 0:
            return cls.E
        if dx < 0:
            return cls.W
        return cls.N if dy > 0 else cls.S


_UNIT = {
    Direction.N: (0.0, 1.0),
    Direction.E: (1.0, 0.0),
    Direction.S: (0.0, -1.0),
    Direction.W: (-1.0, 0.0),
}

NS_MASK = Direction.N.bit | Direction.S.bit
EW_MASK = Direction.E.bit | Direction.W.bit


def mask_is_conflict_free(mask: int) -> bool:
    """True when the mask never greens two orthogonal directions."""
    if mask & ~0x0F:
        return False
    return not (mask & NS_MASK and mask & EW_MASK)


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise WorldError(f"non-finite position ({self.x}, {self.y})")

    def dist(self, other: Position) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True, slots=True)
class Approach:
    intersection_id: int
    direction: Direction
    stop_line: Position


@dataclass(frozen=True, slots=True)
class Intersection:
    id: int
    center: Position
    box_half_width: float = DEFAULT_BOX_HALF_WIDTH
    _approaches: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.box_half_width > 0:
            raise WorldError(f"intersection {self.id}: box_half_width must be > 0")
        hw = self.box_half_width
        approaches = []
        for d in Direction:
            ux, uy = d.unit
            stop = Position(self.center.x - ux * hw, self.center.y - uy * hw)
            approaches.append(Approach(self.id, d, stop))
        object.__setattr__(self, "_approaches", tuple(approaches))

    def approach(self, direction: Direction) -> Approach:
        return self._approaches[direction]

    def approaches(self) -> list[Approach]:
        return [self.approach(d) for d in Direction]

    def contains(self, pos: Position) -> bool:
        # strict: a vehicle standing on its stop line is outside
        hw = self.box_half_width
        return abs(pos.x - self.center.x) < hw and abs(pos.y - self.center.y) < hw


def _axis_offsets(pos: Position, approach: Approach) -> tuple[float, float]:
    """(along, lateral) offset of pos relative to the stop line.

    ``along`` is positive upstream of the line.
    """
    ux, uy = approach.direction.unit
    dx = approach.stop_line.x - pos.x
    dy = approach.stop_line.y - pos.y
    return dx * ux + dy * uy, abs(dx * uy - dy * ux)


def past_stop_line(pos: Position, approach: Approach) -> bool:
    along, _ = _axis_offsets(pos, approach)
    return along < 0.0


def distance_to_stop_line(pos: Position, approach: Approach) -> float:
    """Distance along the travel axis; 0.0 at or past the line.

    Use ``past_stop_line`` to tell the two zero cases apart.
    """
    along, lateral = _axis_offsets(pos, approach)
    if lateral > AXIS_TOL_FT:
        raise WorldError(
            f"position ({pos.x}, {pos.y}) is {lateral:.2f} ft off the "
            f"{approach.direction.name} axis of intersection {approach.intersection_id}"
        )
    return along if along > 0.0 else 0.0


def is_approaching(pos: Position, heading: Direction, intersection: Intersection,
                   radius: float) -> bool:
    """True iff pos is on the heading's approach, short of the center, within radius."""
    if not radius > 0:
        raise WorldError("radius must be > 0")
    approach = intersection.approach(heading)
    along, lateral = _axis_offsets(pos, approach)
    if lateral > AXIS_TOL_FT:
        return False
    # along is measured from the stop line; the center sits hw further on
    if along < -intersection.box_half_width:
        return False
    return max(along, 0.0) <= radius


def conflicts(a: Approach, b: Approach) -> bool:
    if a.intersection_id != b.intersection_id:
        raise WorldError(
            f"approaches belong to different intersections "
            f"({a.intersection_id} vs {b.intersection_id})"
        )
    return a.direction.is_orthogonal(b.direction)


@dataclass(frozen=True)
class Route:
    """Closed rectilinear loop. Segment i runs from waypoint i to i+1 (wrapping)."""

    id: str
    waypoints: tuple[Position, ...]
    directions: tuple[Direction, ...] = field(init=False)

    def __post_init__(self) -> None:
        pts = self.waypoints
        if len(pts) < 4:
            raise WorldError(f"route {self.id!r}: a closed rectilinear loop needs >= 4 waypoints")
        dirs = []
        for i, a in enumerate(pts):
            b = pts[(i + 1) % len(pts)]
            try:
                dirs.append(Direction.from_delta(b.x - a.x, b.y - a.y))
            except WorldError as exc:
                raise WorldError(f"route {self.id!r}, segment {i}: {exc}") from None
        object.__setattr__(self, "directions", tuple(dirs))

    @property
    def length(self) -> float:
        n = len(self.waypoints)
        return sum(self.waypoints[i].dist(self.waypoints[(i + 1) % n]) for i in range(n))

    def signed_area(self) -> float:
        pts = self.waypoints
        n = len(pts)
        return 0.5 * sum(pts[i].x * pts[(i + 1) % n].y - pts[(i + 1) % n].x * pts[i].y
                         for i in range(n))

    def reversed(self) -> Route:
        pts = self.waypoints
        return Route(self.id, (pts[0],) + tuple(reversed(pts[1:])))

    def oriented(self, clockwise: bool) -> Route:
        """This loop traversed clockwise (negative signed area) or counter-clockwise."""
        if (self.signed_area() < 0) == clockwise:
            return self
        return self.reversed()


@dataclass(frozen=True)
class World:
    intersections: tuple[Intersection, ...]
    routes: dict[str, Route]

    def intersection(self, iid: int) -> Intersection:
        for inter in self.intersections:
            if inter.id == iid:
                return inter
        raise WorldError(f"unknown intersection {iid}")

    def locate_box(self, pos: Position) -> Intersection | None:
        for inter in self.intersections:
            if inter.contains(pos):
                return inter
        return None

    def corner_distances(self, a: Position, b: Position) -> tuple[float, float]:
        """Distances of a and b to the intersection minimizing their sum."""
        best = None
        for inter in self.intersections:
            da = a.dist(inter.center)
            db = b.dist(inter.center)
            if best is None or da + db < best[0] + best[1]:
                best = (da, db)
        return best if best is not None else (0.0, 0.0)


def rectangle(width: float, height: float, origin: Sequence[float] = (0.0, 0.0)) -> tuple[Position, ...]:
    """Counter-clockwise corners of an axis-aligned rectangle."""
    x0, y0 = origin
    return (Position(x0, y0), Position(x0 + width, y0),
            Position(x0 + width, y0 + height), Position(x0, y0 + height))
