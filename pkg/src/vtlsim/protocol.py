"""Per-vehicle Virtual Traffic Light state machine.

``step`` is a pure function: the caller owns the state value, the neighbor
table and the outbox. One call per vehicle per tick.

Election: every conflicting approacher broadcasts an ElectionClaim carrying
its distance to the stop line; when the window closes the claimant farthest
from its line leads (ties to the lowest id). The leader holds red on its own
axis and green on the orthogonal one, hands over after a fixed phase, and
releases once no orthogonal approacher is left.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

from .codec import Bsm, ElectionClaim, HandoverAccept, HandoverOffer, Message, Spat
from .world import (
    Approach,
    Direction,
    Intersection,
    Position,
    World,
    conflicts,
    distance_to_stop_line,
    is_approaching,
)


class Drive(Enum):
    CRUISE = "Cruise"
    STOP_AT_LINE = "StopAtLine"
    PROCEED = "Proceed"


@dataclass(frozen=True)
class VtlParams:
    detection_radius: float = 300.0
    election_window_ms: int = 300
    phase_duration_ms: int = 30_000
    spat_interval_ms: int = 100
    spat_timeout_ms: int = 500
    handover_retries: int = 3
    handover_retry_ms: int = 200
    stale_ms: int = 1000
    bsm_interval_ms: int = 100

    def __post_init__(self) -> None:
        for name in ("detection_radius", "election_window_ms", "phase_duration_ms",
                     "spat_interval_ms", "spat_timeout_ms", "handover_retries",
                     "handover_retry_ms", "stale_ms", "bsm_interval_ms"):
            if not getattr(self, name) > 0:
                raise ValueError(f"vtl.{name} must be > 0")
        if self.election_window_ms < 2 * self.bsm_interval_ms:
            raise ValueError("vtl.election_window_ms must be >= 2 x bsm_interval_ms")


# -- states -----------------------------------------------------------------

@dataclass(frozen=True)
class FreeDriving:
    pass


@dataclass(frozen=True)
class Approaching:
    intersection_id: int


@dataclass(frozen=True)
class Electing:
    intersection_id: int
    claims_heard: dict = field(hash=False)  # vehicle_id -> claimed distance, own claim included
    window_deadline_ms: int
    own_distance: float


@dataclass(frozen=True)
class Follower:
    intersection_id: int
    last_spat: Spat | None
    spat_deadline_ms: int
    promoted_by: HandoverOffer | None = None  # accepted offer; we lead from the next tick


@dataclass(frozen=True)
class Leader:
    intersection_id: int
    green_mask: int
    phase_deadline_ms: int
    next_spat_ms: int
    predecessor_id: int | None = None  # leader we took over from, if any


@dataclass(frozen=True)
class HandoverPending:
    intersection_id: int
    offer: HandoverOffer
    retries_left: int
    retry_deadline_ms: int
    green_mask: int  # mask resumed if the handover fails
    next_spat_ms: int


ProtocolState = Union[FreeDriving, Approaching, Electing, Follower, Leader, HandoverPending]


def state_label(state: ProtocolState) -> str:
    name = type(state).__name__
    iid = getattr(state, "intersection_id", None)
    return name if iid is None else f"{name}({iid})"


# -- inputs -----------------------------------------------------------------

@dataclass(frozen=True)
class Ego:
    """What the vehicle knows about itself this tick.

    ``approach`` is the approach of the intersection whose box the vehicle is
    in, else of the next intersection within detection radius, else None.
    """
    vehicle_id: int
    pos: Position
    heading: Direction
    speed: float
    approach: Approach | None
    distance: float = 0.0
    in_box: bool = False


@dataclass
class NeighborTable:
    entries: dict = field(default_factory=dict)  # vehicle_id -> (Bsm, last_heard_ms)

    def observe(self, bsm: Bsm, now_ms: int) -> None:
        self.entries[bsm.vehicle_id] = (bsm, now_ms)

    def fresh(self, now_ms: int, stale_ms: int) -> NeighborTable:
        return NeighborTable({vid: e for vid, e in self.entries.items()
                              if now_ms - e[1] <= stale_ms})

    def evict(self, now_ms: int, stale_ms: int) -> None:
        self.entries = self.fresh(now_ms, stale_ms).entries

    def bsms(self) -> Iterable[Bsm]:
        for vid in sorted(self.entries):
            yield self.entries[vid][0]


@dataclass(frozen=True)
class NeighborView:
    vehicle_id: int
    direction: Direction
    distance: float
    in_box: bool


def neighbors_at(neighbors: NeighborTable, inter: Intersection, radius: float) -> list[NeighborView]:
    """Neighbors approaching or inside ``inter``, as seen from their last BSM."""
    out = []
    for bsm in neighbors.bsms():
        pos = Position(bsm.x, bsm.y)
        heading = Direction.from_heading(bsm.heading)
        if inter.contains(pos):
            out.append(NeighborView(bsm.vehicle_id, heading, 0.0, True))
        elif is_approaching(pos, heading, inter, radius):
            d = distance_to_stop_line(pos, inter.approach(heading))
            out.append(NeighborView(bsm.vehicle_id, heading, d, False))
    return out


def conflicting_approachers(views: Sequence[NeighborView], inter: Intersection,
                            approach: Approach) -> list[NeighborView]:
    """Orthogonal vehicles still upstream of their stop line."""
    return [v for v in views
            if not v.in_box and conflicts(approach, inter.approach(v.direction))]


def election_winner(claims: dict) -> int:
    """Greatest claimed distance wins; ties go to the lowest id."""
    return min(claims, key=lambda vid: (-claims[vid], vid))


def orthogonal_mask(direction: Direction) -> int:
    return Direction((direction.value + 1) % 4).axis_mask


# -- step -------------------------------------------------------------------

@dataclass
class _Ctx:
    ego: Ego
    now: int
    params: VtlParams
    inter: Intersection | None
    views: list
    spats: list
    claims: list
    offers: list
    accepts: list
    out: list


def step(state: ProtocolState, neighbors: NeighborTable, inbox: Sequence[Message], ego: Ego,
         now_ms: int, params: VtlParams, world: World
         ) -> tuple[ProtocolState, list[Message], Drive]:
    """Advance one vehicle by one tick. Returns (state, outbox, drive command)."""
    neighbors = neighbors.fresh(now_ms, params.stale_ms)
    out: list[Message] = []
    if now_ms % params.bsm_interval_ms == 0:
        out.append(Bsm(ego.vehicle_id, now_ms, ego.pos.x, ego.pos.y, ego.speed,
                       ego.heading.heading_deg))

    iid = ego.approach.intersection_id if ego.approach is not None else None
    if not isinstance(state, FreeDriving) and state.intersection_id != iid:
        state = FreeDriving()
    if iid is None:
        return FreeDriving(), out, Drive.CRUISE

    inter = world.intersection(iid)
    ctx = _Ctx(ego, now_ms, params, inter, neighbors_at(neighbors, inter, params.detection_radius),
               [], [], [], [], out)
    for m in inbox:
        if getattr(m, "intersection_id", None) != iid:
            continue
        if isinstance(m, Spat):
            ctx.spats.append(m)
        elif isinstance(m, ElectionClaim):
            ctx.claims.append(m)
        elif isinstance(m, HandoverOffer):
            ctx.offers.append(m)
        elif isinstance(m, HandoverAccept):
            ctx.accepts.append(m)

    if isinstance(state, FreeDriving):
        state = Approaching(iid)
    handler = _HANDLERS[type(state)]
    state, drive = handler(state, ctx)
    return state, out, _box_interlock(drive, ctx)


def _box_interlock(drive: Drive, ctx: _Ctx) -> Drive:
    # hold at the line while anyone not travelling our way occupies the box
    if drive is Drive.STOP_AT_LINE or ctx.ego.in_box:
        return drive
    for v in ctx.views:
        if v.in_box and v.direction != ctx.ego.heading:
            return Drive.STOP_AT_LINE
    return drive


def _lowest_spat(spats: list) -> Spat:
    return min(spats, key=lambda s: (s.leader_id, s.timestamp_ms))


def _offer_for_me(ctx: _Ctx) -> HandoverOffer | None:
    mine = [o for o in ctx.offers if o.new_leader_id == ctx.ego.vehicle_id]
    return min(mine, key=lambda o: o.sender_id) if mine else None


def _accept_offer(offer: HandoverOffer, ctx: _Ctx):
    # Take over one tick later, once the old leader has had the chance to hear
    # the accept; until then the all-red phase holds us at the line.
    ctx.out.append(HandoverAccept(offer.intersection_id, ctx.ego.vehicle_id, offer.sender_id))
    return Follower(offer.intersection_id, Spat(offer.intersection_id, offer.sender_id, 0, 0,
                                                ctx.now),
                    ctx.now + ctx.params.spat_timeout_ms, offer), Drive.STOP_AT_LINE


def _take_over(offer: HandoverOffer, ctx: _Ctx):
    leader = Leader(offer.intersection_id, offer.green_mask,
                    ctx.now + ctx.params.phase_duration_ms, ctx.now, offer.sender_id)
    return _on_leader(leader, ctx, fresh=True)


def _follow(spat: Spat | None, ctx: _Ctx):
    return _on_follower(Follower(ctx.inter.id, spat, ctx.now + ctx.params.spat_timeout_ms),
                        ctx, fresh=True)


def _on_approaching(state: Approaching, ctx: _Ctx):
    ego = ctx.ego
    if ego.in_box:
        return state, Drive.CRUISE
    offer = _offer_for_me(ctx)
    if offer is not None:
        return _accept_offer(offer, ctx)
    if ctx.spats:
        return _follow(_lowest_spat(ctx.spats), ctx)
    claims = [c for c in ctx.claims if c.sender_id != ego.vehicle_id]
    if claims or conflicting_approachers(ctx.views, ctx.inter, ego.approach):
        heard = {c.sender_id: c.distance_to_stop_line for c in claims}
        heard[ego.vehicle_id] = ego.distance
        electing = Electing(state.intersection_id, heard,
                            ctx.now + ctx.params.election_window_ms, ego.distance)
        return _on_electing(electing, ctx, fresh=True)
    return state, Drive.CRUISE


def _on_electing(state: Electing, ctx: _Ctx, fresh: bool = False):
    offer = _offer_for_me(ctx)
    if offer is not None:
        return _accept_offer(offer, ctx)
    if ctx.spats:
        return _follow(_lowest_spat(ctx.spats), ctx)
    claims = dict(state.claims_heard)
    if not fresh:
        for c in ctx.claims:
            claims[c.sender_id] = c.distance_to_stop_line
    if ctx.now >= state.window_deadline_ms:
        if election_winner(claims) == ctx.ego.vehicle_id:
            leader = Leader(state.intersection_id, orthogonal_mask(ctx.ego.approach.direction),
                            ctx.now + ctx.params.phase_duration_ms, ctx.now)
            return _on_leader(leader, ctx, fresh=True)
        return _follow(None, ctx)
    # re-announce every tick of the window so a single loss does not split the vote
    ctx.out.append(ElectionClaim(state.intersection_id, ctx.ego.vehicle_id, state.own_distance))
    return Electing(state.intersection_id, claims, state.window_deadline_ms,
                    state.own_distance), Drive.STOP_AT_LINE


def _on_follower(state: Follower, ctx: _Ctx, fresh: bool = False):
    if state.promoted_by is not None and not fresh:
        return _take_over(state.promoted_by, ctx)
    if not fresh:
        offer = _offer_for_me(ctx)
        if offer is not None:
            return _accept_offer(offer, ctx)
    last, deadline = state.last_spat, state.spat_deadline_ms
    if ctx.spats and not fresh:
        last = _lowest_spat(ctx.spats)
        deadline = ctx.now + ctx.params.spat_timeout_ms
    elif not fresh and ctx.now >= deadline:
        return _on_approaching(Approaching(state.intersection_id), ctx)
    new = Follower(state.intersection_id, last, deadline)
    green = last is not None and bool(last.green_mask & ctx.ego.approach.direction.bit)
    return new, Drive.PROCEED if green else Drive.STOP_AT_LINE


def _spat(ctx: _Ctx, mask: int, remaining: int) -> Spat:
    return Spat(ctx.inter.id, ctx.ego.vehicle_id, mask, max(0, remaining), ctx.now)


def _on_leader(state: Leader, ctx: _Ctx, fresh: bool = False):
    ego, params = ctx.ego, ctx.params
    if not fresh:
        # the predecessor's all-red Spats may still be in flight; they are not a rival phase
        lower = [s for s in ctx.spats if s.leader_id < ego.vehicle_id
                 and not (s.leader_id == state.predecessor_id and s.green_mask == 0)]
        if lower:
            return _follow(_lowest_spat(lower), ctx)

    rivals = conflicting_approachers(ctx.views, ctx.inter, ego.approach)
    if not rivals:
        # release: one last phase greening our own axis, then silence
        ctx.out.append(_spat(ctx, ego.approach.direction.axis_mask, 0))
        return Approaching(state.intersection_id), Drive.PROCEED

    if ctx.now >= state.phase_deadline_ms:
        target = min(rivals, key=lambda v: (v.distance, v.vehicle_id))
        offer = HandoverOffer(state.intersection_id, ego.vehicle_id, target.vehicle_id,
                              ego.approach.direction.axis_mask)
        ctx.out.append(offer)
        ctx.out.append(_spat(ctx, 0, 0))
        pending = HandoverPending(state.intersection_id, offer, params.handover_retries,
                                  ctx.now + params.handover_retry_ms, state.green_mask,
                                  ctx.now + params.spat_interval_ms)
        return pending, Drive.STOP_AT_LINE

    next_spat = state.next_spat_ms
    if ctx.now >= next_spat:
        ctx.out.append(_spat(ctx, state.green_mask, state.phase_deadline_ms - ctx.now))
        next_spat = ctx.now + params.spat_interval_ms
    return (Leader(state.intersection_id, state.green_mask, state.phase_deadline_ms, next_spat,
                   state.predecessor_id),
            Drive.STOP_AT_LINE)


def _on_handover(state: HandoverPending, ctx: _Ctx):
    ego, params, offer = ctx.ego, ctx.params, state.offer
    accepted = any(a.sender_id == offer.new_leader_id and a.offer_sender_id == ego.vehicle_id
                   for a in ctx.accepts)
    from_new = [s for s in ctx.spats if s.leader_id == offer.new_leader_id]
    if accepted or from_new:
        spat = _lowest_spat(from_new) if from_new else Spat(
            state.intersection_id, offer.new_leader_id, offer.green_mask,
            params.phase_duration_ms, ctx.now)
        return _follow(spat, ctx)
    lower = [s for s in ctx.spats if s.leader_id < ego.vehicle_id]
    if lower:
        return _follow(_lowest_spat(lower), ctx)

    retries, retry_deadline = state.retries_left, state.retry_deadline_ms
    if ctx.now >= retry_deadline:
        if retries == 0:
            leader = Leader(state.intersection_id, state.green_mask,
                            ctx.now + params.phase_duration_ms, ctx.now)
            return _on_leader(leader, ctx, fresh=True)
        ctx.out.append(offer)
        retries -= 1
        retry_deadline = ctx.now + params.handover_retry_ms
    next_spat = state.next_spat_ms
    if ctx.now >= next_spat:
        ctx.out.append(_spat(ctx, 0, 0))
        next_spat = ctx.now + params.spat_interval_ms
    return (HandoverPending(state.intersection_id, offer, retries, retry_deadline,
                            state.green_mask, next_spat),
            Drive.STOP_AT_LINE)


_HANDLERS = {
    Approaching: _on_approaching,
    Electing: _on_electing,
    Follower: _on_follower,
    Leader: _on_leader,
    HandoverPending: _on_handover,
}
