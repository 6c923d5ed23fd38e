"""Fixed-step simulation loop.

Per tick, vehicles in ascending id order: (1) emit the outbox produced by
their previous protocol step, (2) the channel delivers each frame, (3) the
VTL protocol (or the stop-sign referee) decides a drive command, (4)
kinematics advance. Finished vehicles leave the road.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from . import codec
from .baseline import StopSignState, VehicleView, stop_sign_step
from .codec import Bsm, ElectionClaim, HandoverAccept, HandoverOffer, Spat
from .kinematics import Track, VehicleKin, advance_kinematics
from .protocol import (
    Ego,
    FreeDriving,
    HandoverPending,
    Leader,
    NeighborTable,
    ProtocolState,
    state_label,
    step,
)
from .scenario import Scenario
from .world import Direction, mask_is_conflict_free

TRACE_COLUMNS = ("tick", "vehicle", "x", "y", "speed", "protocol_state")
_KIND = {Bsm: "bsm", Spat: "spat", ElectionClaim: "wsm", HandoverOffer: "wsm",
         HandoverAccept: "wsm"}


class SimulationTimeout(RuntimeError):
    """max_time elapsed before every vehicle finished; likely a deadlock."""

    def __init__(self, report: SimReport):
        self.report = report
        unfinished = [v["id"] for v in report.vehicles if not v["finished"]]
        super().__init__(f"timeout - possible deadlock (unfinished vehicles: {unfinished})")


@dataclass
class SimReport:
    scenario: str
    controller: str
    seed: int
    tick_ms: int
    laps_to_complete: int
    vehicles: list = field(default_factory=list)
    messages: dict = field(default_factory=dict)
    ipg: list = field(default_factory=list)
    safety: dict = field(default_factory=dict)
    sim_time_s: float = 0.0
    timed_out: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> SimReport:
        return cls(**json.loads(text))

    def vehicle(self, vid: int) -> dict:
        for v in self.vehicles:
            if v["id"] == vid:
                return v
        raise KeyError(vid)


@dataclass
class Car:
    """Mutable per-vehicle simulation slot."""
    kin: VehicleKin
    state: ProtocolState = field(default_factory=FreeDriving)
    neighbors: NeighborTable = field(default_factory=NeighborTable)
    outbox: list = field(default_factory=list)
    inbox: list = field(default_factory=list)
    stops: int = 0
    stopped_ticks: int = 0
    finish_ms: int | None = None


def _start_offsets(sc: Scenario) -> dict[int, float]:
    if sc.start_jitter_ft == 0:
        return {v.id: 0.0 for v in sc.vehicles}
    # separate stream from the channel so jitter never perturbs radio draws
    rng = np.random.default_rng([sc.seed, 0x5EED])
    return {v.id: float(rng.uniform(-sc.start_jitter_ft, sc.start_jitter_ft))
            for v in sc.vehicles}


def _ego(car: Car, radius: float) -> tuple[Ego, Any]:
    kin = car.kin
    track = kin.track
    pos = kin.position
    heading = kin.heading
    box = track.box_at(kin.progress)
    if box is not None:
        inter = box.intersection
        return Ego(kin.id, pos, heading, kin.speed, inter.approach(box.entry), 0.0, True), box
    nxt, d = track.next_stop(kin.progress)
    if nxt is None or d > radius:
        return Ego(kin.id, pos, heading, kin.speed, None), None
    return Ego(kin.id, pos, heading, kin.speed, nxt.intersection.approach(nxt.entry), d), nxt


def _queue_gaps(active: list[Car]) -> dict[int, float | None]:
    gaps: dict[int, float | None] = {c.kin.id: None for c in active}
    lanes: dict[tuple, list[Car]] = {}
    for c in active:
        lanes.setdefault((c.kin.track.route.id, c.kin.track.clockwise), []).append(c)
    for lane in lanes.values():
        if len(lane) < 2:
            continue
        for c in lane:
            gaps[c.kin.id] = min(c.kin.track.ahead(c.kin.progress, o.kin.progress)
                                 for o in lane if o is not c)
    return gaps


def run(sc: Scenario, *, controller: str | None = None, seed: int | None = None,
        trace: io.TextIOBase | None = None, raise_on_timeout: bool = True,
        inject: Callable[[int, Sequence[Car]], None] | None = None) -> SimReport:
    """Simulate ``sc`` to completion.

    ``inject(now_ms, active_cars)`` runs before the protocol step of every
    tick and may overwrite protocol states; it exists for fault-injection tests.
    """
    controller = controller or sc.controller
    seed = sc.seed if seed is None else seed
    sc = replace(sc, seed=seed)
    world = sc.world
    dt_ms = sc.tick_ms
    dt = dt_ms / 1000.0
    params = sc.vtl
    radius = params.detection_radius

    tracks = {}
    offsets = _start_offsets(sc)
    cars = []
    for spec in sc.vehicles:
        key = (spec.route, spec.clockwise)
        if key not in tracks:
            tracks[key] = Track(world.routes[spec.route], world, spec.clockwise)
        track = tracks[key]
        speed = sc.kinematics.target_speed if spec.start_speed is None else spec.start_speed
        start = (spec.start_progress + offsets[spec.id]) % track.length
        cars.append(Car(VehicleKin(spec.id, track, start, speed, 0.0, sc.kinematics)))
    goal = {c.kin.id: c.kin.track.length * sc.laps_to_complete for c in cars}

    channel = sc.channel.model(seed)
    sent = {"bsm": 0, "spat": 0, "wsm": 0}
    delivered = {"bsm": 0, "spat": 0, "wsm": 0}
    spat_masks: dict[int, int] = {}
    invalid = 0
    last_rx: dict[tuple[int, int], int] = {}
    gaps: dict[tuple[int, int], list[int]] = {}
    box_conflict_ticks = 0
    dual_leader_ticks = 0
    max_leaders = 0
    stop_state = StopSignState()
    writer = csv.writer(trace, lineterminator="\n") if trace is not None else None
    if writer:
        writer.writerow(TRACE_COLUMNS)

    max_ticks = int(round(sc.max_time_s * 1000 / dt_ms))
    tick = 0
    active = list(cars)
    while active and tick < max_ticks:
        now = tick * dt_ms

        if controller == "vtl":
            # (1) emit + (2) deliver
            # distance of every vehicle to every corner; a pair uses the corner
            # minimizing the sum (same rule as World.corner_distances)
            corner_d = {}
            for c in active:
                pos = c.kin.position
                corner_d[c.kin.id] = [pos.dist(i.center) for i in world.intersections]
            by_id = {c.kin.id: c for c in active}
            for c in active:
                c.inbox = []
            for c in active:
                sid = c.kin.id
                for msg in c.outbox:
                    try:
                        frame = codec.encode(msg)
                    except codec.ValidationError:
                        invalid += 1
                        continue
                    kind = _KIND[type(msg)]
                    sent[kind] += 1
                    if kind == "spat":
                        spat_masks[msg.green_mask] = spat_masks.get(msg.green_mask, 0) + 1
                    receivers = []
                    for o in active:
                        rid = o.kin.id
                        if rid == sid:
                            continue
                        d_tx, d_rx = min(zip(corner_d[sid], corner_d[rid]),
                                         key=lambda p: p[0] + p[1])
                        receivers.append((rid, d_tx, d_rx))
                    got = channel.transmit(frame, sid, receivers)
                    if not got:
                        continue
                    decoded = codec.decode(frame)
                    for rid in sorted(got):
                        by_id[rid].inbox.append(decoded)
                        delivered[kind] += 1
                        if kind == "bsm":
                            k = (rid, sid)
                            if k in last_rx:
                                gaps.setdefault(k, []).append(now - last_rx[k])
                            last_rx[k] = now
            # (3) protocol
            if inject is not None:
                inject(now, active)
            cmds = {}
            for c in active:
                for m in c.inbox:
                    if isinstance(m, Bsm):
                        c.neighbors.observe(m, now)
                c.neighbors.evict(now, params.stale_ms)
                ego, _ = _ego(c, radius)
                c.state, c.outbox, cmds[c.kin.id] = step(
                    c.state, c.neighbors, c.inbox, ego, now, params, world)
            leaders: dict[int, int] = {}
            for c in active:
                if isinstance(c.state, (Leader, HandoverPending)):
                    leaders[c.state.intersection_id] = leaders.get(c.state.intersection_id, 0) + 1
            if leaders:
                most = max(leaders.values())
                max_leaders = max(max_leaders, most)
                if most > 1:
                    dual_leader_ticks += 1
        else:
            views = []
            for c in active:
                kin = c.kin
                box = kin.track.box_at(kin.progress)
                nxt, d = kin.track.next_stop(kin.progress)
                views.append(VehicleView(
                    kin.id, nxt.intersection.id if nxt else None, nxt.entry if nxt else None,
                    d, kin.speed, box.intersection.id if box else None))
            cmds = stop_sign_step(stop_state, views, now, sc.stop_sign)

        # (4) kinematics
        qgaps = _queue_gaps(active)
        for c in active:
            was_moving = c.kin.speed > 0.0
            c.kin = advance_kinematics(c.kin, cmds[c.kin.id], dt, qgaps[c.kin.id])
            if c.kin.speed == 0.0:
                c.stopped_ticks += 1
                if was_moving:
                    c.stops += 1

        # safety: conflicting entry directions sharing a box
        occupancy: dict[int, set] = {}
        for c in active:
            box = c.kin.track.box_at(c.kin.progress)
            if box is not None:
                occupancy.setdefault(box.intersection.id, set()).add(box.entry)
        for dirs in occupancy.values():
            if any(a.is_orthogonal(b) for a in dirs for b in dirs):
                box_conflict_ticks += 1

        if writer:
            for c in active:
                pos = c.kin.position
                label = state_label(c.state) if controller == "vtl" else (
                    "Granted" if c.kin.id in stop_state.crossing.values() else "StopSign")
                writer.writerow((tick, c.kin.id, repr(pos.x), repr(pos.y),
                                 repr(c.kin.speed), label))

        tick += 1
        for c in active:
            if c.finish_ms is None and c.kin.odometer >= goal[c.kin.id] - 1e-9:
                c.finish_ms = tick * dt_ms
        active = [c for c in active if c.finish_ms is None]

    report = SimReport(
        scenario=sc.name, controller=controller, seed=seed, tick_ms=dt_ms,
        laps_to_complete=sc.laps_to_complete, sim_time_s=tick * dt_ms / 1000.0,
        timed_out=bool(active))
    for c in cars:
        lap_len = c.kin.track.length
        report.vehicles.append({
            "id": c.kin.id,
            "finished": c.finish_ms is not None,
            "total_time_s": (c.finish_ms if c.finish_ms is not None else tick * dt_ms) / 1000.0,
            "laps_completed": min(sc.laps_to_complete, int(c.kin.odometer / lap_len + 1e-9)),
            "distance_ft": c.kin.odometer,
            "stop_count": c.stops,
            "time_stopped_s": c.stopped_ticks * dt_ms / 1000.0,
            "free_flow_s": goal[c.kin.id] / sc.kinematics.target_speed,
        })
    report.messages = {"sent": sent, "delivered": delivered}
    for (rid, sid) in sorted(gaps):
        g = gaps[(rid, sid)]
        report.ipg.append({"receiver_id": rid, "sender_id": sid, "n": len(g),
                           "mean_gap_ms": sum(g) / len(g), "max_gap_ms": max(g),
                           "gaps_ms": g})
    report.safety = {
        "box_conflict_ticks": box_conflict_ticks,
        "invalid_messages": invalid,
        "spat_masks": {str(k): spat_masks[k] for k in sorted(spat_masks)},
        "conflicting_spats": sum(n for m, n in spat_masks.items() if not mask_is_conflict_free(m)),
        "dual_leader_ticks": dual_leader_ticks,
        "max_leaders_per_intersection": max_leaders,
        "stop_sign_grants": len(stop_state.grants),
    }
    if active and raise_on_timeout:
        raise SimulationTimeout(report)
    return report
