"""Four-way stop referee.

An omniscient, radio-free controller: it sees every vehicle's true position
and grants the right of way one vehicle at a time per intersection. A vehicle
arrives when it stands still on its stop line; after ``min_stop_ms`` it may
be granted. Grants go first-come-first-served, same-tick arrivals yield to
the vehicle on their right, and any remaining tie goes to the lowest id.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .protocol import Drive
from .world import Direction

ARRIVAL_TOL_FT = 0.5


@dataclass(frozen=True)
class StopSignParams:
    min_stop_ms: int = 1000

    def __post_init__(self) -> None:
        if self.min_stop_ms < 0:
            raise ValueError("stop_sign.min_stop_ms must be >= 0")


@dataclass(frozen=True)
class Arrival:
    vehicle_id: int
    arrival_ms: int
    direction: Direction


@dataclass(frozen=True)
class VehicleView:
    """Ground truth for one vehicle.

    ``next_intersection`` is the intersection whose stop line is next ahead;
    ``in_box_of`` the intersection whose box the vehicle is inside, if any.
    """
    vehicle_id: int
    next_intersection: int | None
    direction: Direction | None
    distance_to_stop_line: float
    speed: float
    in_box_of: int | None = None


@dataclass
class StopSignState:
    queues: dict = field(default_factory=dict)      # intersection -> list[Arrival]
    crossing: dict = field(default_factory=dict)    # intersection -> vehicle_id
    grants: list = field(default_factory=list)      # (now_ms, intersection, vehicle_id)


def yields_to_right(arrival: Arrival, peers: Iterable[Arrival]) -> bool:
    """True if some other same-tick arrival comes from this vehicle's right."""
    right = arrival.direction.right_of
    return any(p.direction == right for p in peers if p.vehicle_id != arrival.vehicle_id)


def pick_next(queue: Sequence[Arrival]) -> Arrival:
    """Head of the stop-sign queue."""
    first = min(a.arrival_ms for a in queue)
    group = [a for a in queue if a.arrival_ms == first]
    free = [a for a in group if not yields_to_right(a, group)]
    return min(free or group, key=lambda a: a.vehicle_id)


def stop_sign_step(state: StopSignState, views: Sequence[VehicleView], now_ms: int,
                   params: StopSignParams) -> dict[int, Drive]:
    by_id = {v.vehicle_id: v for v in views}

    for iid, vid in list(state.crossing.items()):
        v = by_id.get(vid)
        if v is None or (v.in_box_of != iid and v.next_intersection != iid):
            del state.crossing[iid]

    queued = {a.vehicle_id for q in state.queues.values() for a in q}
    crossing = set(state.crossing.values())
    for v in views:
        if (v.next_intersection is not None and v.in_box_of is None
                and v.vehicle_id not in queued and v.vehicle_id not in crossing
                and v.speed == 0.0 and v.distance_to_stop_line <= ARRIVAL_TOL_FT):
            state.queues.setdefault(v.next_intersection, []).append(
                Arrival(v.vehicle_id, now_ms, v.direction))

    for iid in sorted(state.queues):
        queue = [a for a in state.queues[iid] if a.vehicle_id in by_id]
        state.queues[iid] = queue
        if not queue or iid in state.crossing:
            continue
        head = pick_next(queue)
        if now_ms - head.arrival_ms >= params.min_stop_ms:
            state.crossing[iid] = head.vehicle_id
            queue.remove(head)
            state.grants.append((now_ms, iid, head.vehicle_id))

    granted = set(state.crossing.values())
    cmds = {}
    for v in views:
        if v.vehicle_id in granted or v.in_box_of is not None:
            cmds[v.vehicle_id] = Drive.PROCEED
        else:
            cmds[v.vehicle_id] = Drive.STOP_AT_LINE
    return cmds
