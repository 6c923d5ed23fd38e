import random

from hypothesis import given
from hypothesis import strategies as st

from vtlsim.baseline import (
    Arrival,
    StopSignParams,
    StopSignState,
    VehicleView,
    pick_next,
    stop_sign_step,
)
from vtlsim.protocol import Drive
from vtlsim.world import Direction

P = StopSignParams()


def at_line(vid, direction, iid=1):
    return VehicleView(vid, iid, direction, 0.0, 0.0)


def moving(vid, direction, dist=50.0, iid=1):
    return VehicleView(vid, iid, direction, dist, 10.0)


def in_box(vid, direction, iid=1):
    return VehicleView(vid, None, None, 100.0, 10.0, in_box_of=iid)


def test_lone_vehicle_waits_full_dwell():
    st_ = StopSignState()
    for now in range(0, 1000, 100):
        assert stop_sign_step(st_, [at_line(1, Direction.N)], now, P)[1] is Drive.STOP_AT_LINE
    assert stop_sign_step(st_, [at_line(1, Direction.N)], 1000, P)[1] is Drive.PROCEED


def test_fcfs():
    st_ = StopSignState()
    stop_sign_step(st_, [at_line(1, Direction.N), moving(2, Direction.E, 3.0)], 10_000, P)
    cmds = stop_sign_step(st_, [at_line(1, Direction.N), at_line(2, Direction.E)], 10_400, P)
    cmds = stop_sign_step(st_, [at_line(1, Direction.N), at_line(2, Direction.E)], 11_000, P)
    assert cmds == {1: Drive.PROCEED, 2: Drive.STOP_AT_LINE}


def test_right_hand_rule_on_tie():
    # v1 northbound; westbound traffic comes from its right
    st_ = StopSignState()
    views = [at_line(1, Direction.N), at_line(2, Direction.W)]
    stop_sign_step(st_, views, 0, P)
    assert stop_sign_step(st_, views, 1000, P) == {1: Drive.STOP_AT_LINE, 2: Drive.PROCEED}


def test_lowest_id_fallback():
    # opposite directions: neither is to the other's right
    q = [Arrival(5, 0, Direction.N), Arrival(3, 0, Direction.S)]
    assert pick_next(q).vehicle_id == 3
    # all four ways: everyone has someone on the right
    q = [Arrival(i + 1, 0, d) for i, d in enumerate(Direction)]
    assert pick_next(q).vehicle_id == 1


def test_one_crossing_at_a_time():
    st_ = StopSignState()
    views = [at_line(1, Direction.N), at_line(2, Direction.S)]
    stop_sign_step(st_, views, 0, P)
    stop_sign_step(st_, views, 1000, P)
    # v1 is crossing (in the box); v2 must wait even after its dwell
    views = [in_box(1, Direction.N), at_line(2, Direction.S)]
    for now in (1100, 1500, 3000):
        assert stop_sign_step(st_, views, now, P)[2] is Drive.STOP_AT_LINE
    # v1 clears the box: v2 may go
    views = [moving(1, Direction.N, 200.0, iid=2), at_line(2, Direction.S)]
    assert stop_sign_step(st_, views, 3100, P)[2] is Drive.PROCEED


def test_rolling_vehicle_is_not_an_arrival():
    st_ = StopSignState()
    v = VehicleView(1, 1, Direction.N, 0.0, 2.0)
    for now in range(0, 3000, 100):
        assert stop_sign_step(st_, [v], now, P)[1] is Drive.STOP_AT_LINE


def _oracle_order(arrivals):
    """Grant order by repeated brute-force selection."""
    pending = list(arrivals)
    order = []
    while pending:
        t = min(a.arrival_ms for a in pending)
        group = [a for a in pending if a.arrival_ms == t]

        def precedence(a):
            has_right = any(b.direction == Direction((a.direction - 1) % 4) for b in group
                            if b is not a)
            return (has_right, a.vehicle_id)
        head = sorted(group, key=precedence)[0]
        order.append(head.vehicle_id)
        pending.remove(head)
    return order


@given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from(list(Direction))),
                min_size=1, max_size=6))
def test_grant_order_matches_oracle(spec):
    arrivals = [Arrival(i + 1, t * 100, d) for i, (t, d) in enumerate(spec)]
    queue = list(arrivals)
    order = []
    while queue:
        head = pick_next(queue)
        order.append(head.vehicle_id)
        queue.remove(head)
    assert order == _oracle_order(arrivals)


def test_referee_grants_follow_oracle_on_random_scenes():
    rng = random.Random(7)
    for _ in range(50):
        n = rng.randint(1, 5)
        dirs = [rng.choice(list(Direction)) for _ in range(n)]
        arrive = [rng.randrange(0, 5) * 100 for _ in range(n)]
        st_ = StopSignState()
        crossing_left = {}
        done = []
        for now in range(0, 60_000, 100):
            views = []
            for i in range(n):
                vid = i + 1
                if vid in done:
                    continue
                if vid in crossing_left:
                    crossing_left[vid] -= 1
                    if crossing_left[vid] == 0:
                        done.append(vid)
                        continue
                    views.append(in_box(vid, dirs[i]))
                elif now >= arrive[i]:
                    views.append(at_line(vid, dirs[i]))
                else:
                    views.append(moving(vid, dirs[i]))
            cmds = stop_sign_step(st_, views, now, P)
            for vid, c in cmds.items():
                if c is Drive.PROCEED and vid not in crossing_left:
                    crossing_left[vid] = 3
            if len(done) == n:
                break
        granted = [vid for _, _, vid in st_.grants]
        expected = _oracle_order([Arrival(i + 1, arrive[i], dirs[i]) for i in range(n)])
        assert granted == expected
