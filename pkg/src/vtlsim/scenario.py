"""Scenario documents: JSON syntax, closed key set.

The full schema is in docs/scenario-schema.md. Three error families are
kept distinct so callers (and the CLI) can report them precisely:
``ScenarioParseError`` (not JSON), ``ScenarioSchemaError`` (unknown or
mistyped keys) and ``ScenarioInvariantError`` (well-typed but inconsistent).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

from .baseline import StopSignParams
from .channel import ChannelError, ChannelModel
from .kinematics import KinParams
from .protocol import VtlParams
from .world import Intersection, Position, Route, World, WorldError

CONTROLLERS = ("vtl", "stop4")
BUNDLED = ("fieldtest", "lone", "lot4")


class ScenarioError(Exception):
    pass


class ScenarioParseError(ScenarioError):
    pass


class ScenarioSchemaError(ScenarioError):
    pass


class ScenarioInvariantError(ScenarioError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    reliable_sum: float = 500.0
    cutoff_sum: float = 600.0
    zero_sum: float = 700.0
    p_max: float = 0.98
    p_cutoff: float = 0.10
    lossless: bool = False

    def __post_init__(self) -> None:
        self.model(0)  # raises ChannelError on inconsistent parameters

    def model(self, seed: int) -> ChannelModel:
        if self.lossless:
            return ChannelModel.lossless(seed)
        return ChannelModel(self.reliable_sum, self.cutoff_sum, self.zero_sum,
                            self.p_max, self.p_cutoff, seed)


@dataclass(frozen=True)
class VehicleSpec:
    id: int
    route: str
    start_progress: float
    clockwise: bool
    start_speed: float | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    world: World
    vehicles: tuple[VehicleSpec, ...]
    controller: str = "vtl"
    channel: ChannelParams = ChannelParams()
    vtl: VtlParams = VtlParams()
    stop_sign: StopSignParams = StopSignParams()
    kinematics: KinParams = KinParams()
    tick_ms: int = 100
    laps_to_complete: int = 5
    max_time_s: float = 3600.0
    seed: int = 0
    start_jitter_ft: float = 0.0
    source: str = field(default="", compare=False)


_TOP_KEYS = {"name", "world", "vehicles", "controller", "channel", "vtl", "stop_sign",
             "kinematics", "tick_ms", "laps_to_complete", "max_time_s", "seed",
             "start_jitter_ft"}
_REQUIRED_TOP = {"name", "world", "vehicles"}
_WORLD_KEYS = {"box_half_width", "intersections", "routes"}
_INTER_KEYS = {"id", "x", "y"}
_ROUTE_KEYS = {"id", "waypoints"}
_VEHICLE_KEYS = {"id", "route", "start_progress", "direction", "start_speed"}


def _keys(obj: Any, path: str, allowed: set, required: set = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioSchemaError(f"{path}: expected an object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioSchemaError(f"{path}: unknown key(s) {', '.join(map(repr, unknown))}")
    missing = sorted(required - set(obj))
    if missing:
        raise ScenarioSchemaError(f"{path}: missing required key(s) {', '.join(map(repr, missing))}")
    return obj


def _num(v: Any, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioSchemaError(f"{path}: expected a number, got {v!r}")
    return float(v)


def _int(v: Any, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioSchemaError(f"{path}: expected an integer, got {v!r}")
    return v


def _str(v: Any, path: str) -> str:
    if not isinstance(v, str):
        raise ScenarioSchemaError(f"{path}: expected a string, got {v!r}")
    return v


def _list(v: Any, path: str) -> list:
    if not isinstance(v, list):
        raise ScenarioSchemaError(f"{path}: expected a list, got {type(v).__name__}")
    return v


def _params(cls, obj: Any, path: str):
    """Fill a flat parameter dataclass from a JSON object, type-checked per field."""
    spec = {f.name: f for f in fields(cls)}
    _keys(obj, path, set(spec))
    kwargs = {}
    for key, val in obj.items():
        default = getattr(cls(), key)
        where = f"{path}.{key}"
        if isinstance(default, bool):
            if not isinstance(val, bool):
                raise ScenarioSchemaError(f"{where}: expected true/false, got {val!r}")
            kwargs[key] = val
        elif isinstance(default, int):
            kwargs[key] = _int(val, where)
        else:
            kwargs[key] = _num(val, where)
    try:
        return cls(**kwargs)
    except (ValueError, ChannelError) as exc:
        raise ScenarioInvariantError(f"{path}: {exc}") from None


def _world(obj: Any) -> World:
    _keys(obj, "world", _WORLD_KEYS, {"intersections", "routes"})
    hw = _num(obj.get("box_half_width", 15.0), "world.box_half_width")
    inters = []
    for i, raw in enumerate(_list(obj["intersections"], "world.intersections")):
        path = f"world.intersections[{i}]"
        _keys(raw, path, _INTER_KEYS, _INTER_KEYS)
        try:
            inters.append(Intersection(_int(raw["id"], f"{path}.id"),
                                       Position(_num(raw["x"], f"{path}.x"),
                                                _num(raw["y"], f"{path}.y")), hw))
        except WorldError as exc:
            raise ScenarioInvariantError(f"{path}: {exc}") from None
    ids = [x.id for x in inters]
    if len(set(ids)) != len(ids):
        raise ScenarioInvariantError("world.intersections: duplicate id")
    routes = {}
    for i, raw in enumerate(_list(obj["routes"], "world.routes")):
        path = f"world.routes[{i}]"
        _keys(raw, path, _ROUTE_KEYS, _ROUTE_KEYS)
        rid = _str(raw["id"], f"{path}.id")
        pts = []
        for j, wp in enumerate(_list(raw["waypoints"], f"{path}.waypoints")):
            wpath = f"{path}.waypoints[{j}]"
            if not isinstance(wp, list) or len(wp) != 2:
                raise ScenarioSchemaError(f"{wpath}: expected [x, y]")
            pts.append(Position(_num(wp[0], wpath), _num(wp[1], wpath)))
        if rid in routes:
            raise ScenarioInvariantError(f"{path}.id: duplicate route {rid!r}")
        try:
            routes[rid] = Route(rid, tuple(pts))
        except WorldError as exc:
            raise ScenarioInvariantError(f"{path}: {exc}") from None
    return World(tuple(inters), routes)


def _vehicles(raw_list: Any, world: World) -> tuple[VehicleSpec, ...]:
    out = []
    for i, raw in enumerate(_list(raw_list, "vehicles")):
        path = f"vehicles[{i}]"
        _keys(raw, path, _VEHICLE_KEYS, {"id", "route", "start_progress", "direction"})
        vid = _int(raw["id"], f"{path}.id")
        if not 0 <= vid <= 0xFFFFFFFF:
            raise ScenarioInvariantError(f"{path}.id: must fit in 32 bits")
        route = _str(raw["route"], f"{path}.route")
        if route not in world.routes:
            raise ScenarioInvariantError(f"{path}.route: unknown route {route!r}")
        direction = _str(raw["direction"], f"{path}.direction")
        if direction not in ("cw", "ccw"):
            raise ScenarioSchemaError(f"{path}.direction: expected 'cw' or 'ccw', got {direction!r}")
        start = _num(raw["start_progress"], f"{path}.start_progress")
        if not 0 <= start < world.routes[route].length:
            raise ScenarioInvariantError(f"{path}.start_progress: outside [0, route length)")
        speed = raw.get("start_speed")
        if speed is not None:
            speed = _num(speed, f"{path}.start_speed")
            if speed < 0:
                raise ScenarioInvariantError(f"{path}.start_speed: must be >= 0")
        out.append(VehicleSpec(vid, route, start, direction == "cw", speed))
    if not out:
        raise ScenarioInvariantError("vehicles: at least one vehicle required")
    ids = [v.id for v in out]
    if len(set(ids)) != len(ids):
        raise ScenarioInvariantError("vehicles: duplicate id")
    return tuple(sorted(out, key=lambda v: v.id))


def load_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return _build(doc, source)
    except ScenarioError as exc:
        raise type(exc)(f"{source}: {exc}") from None


def _build(doc: Any, source: str) -> Scenario:
    _keys(doc, "scenario", _TOP_KEYS, _REQUIRED_TOP)
    world = _world(doc["world"])
    vehicles = _vehicles(doc["vehicles"], world)
    kw: dict[str, Any] = {"name": _str(doc["name"], "name"), "world": world,
                          "vehicles": vehicles, "source": source}
    if "controller" in doc:
        ctrl = _str(doc["controller"], "controller")
        if ctrl not in CONTROLLERS:
            raise ScenarioSchemaError(f"controller: expected one of {CONTROLLERS}, got {ctrl!r}")
        kw["controller"] = ctrl
    for key, cls in (("channel", ChannelParams), ("vtl", VtlParams),
                     ("stop_sign", StopSignParams), ("kinematics", KinParams)):
        if key in doc:
            kw[key] = _params(cls, doc[key], key)
    for key in ("tick_ms", "laps_to_complete", "seed"):
        if key in doc:
            kw[key] = _int(doc[key], key)
    for key in ("max_time_s", "start_jitter_ft"):
        if key in doc:
            kw[key] = _num(doc[key], key)
    sc = Scenario(**kw)
    _check_invariants(sc)
    return sc


def _check_invariants(sc: Scenario) -> None:
    if sc.tick_ms <= 0:
        raise ScenarioInvariantError(f"tick_ms: must be > 0, got {sc.tick_ms}")
    for name in ("spat_interval_ms", "bsm_interval_ms"):
        if getattr(sc.vtl, name) % sc.tick_ms:
            raise ScenarioInvariantError(f"tick_ms: must divide vtl.{name}")
    if sc.laps_to_complete < 1:
        raise ScenarioInvariantError("laps_to_complete: must be >= 1")
    if sc.max_time_s <= 0:
        raise ScenarioInvariantError("max_time_s: must be > 0")
    if not 0 <= sc.seed < 2**64:
        raise ScenarioInvariantError("seed: must be a u64")
    if sc.start_jitter_ft < 0:
        raise ScenarioInvariantError("start_jitter_ft: must be >= 0")


def read_scenario(path: str | Path) -> Scenario:
    """Load a scenario file; bare bundled names (``fieldtest``) are accepted too."""
    p = Path(path)
    if p.is_file():
        return load_scenario(p.read_text(), str(p))
    stem = p.name[:-len(".scenario")] if p.name.endswith(".scenario") else p.name
    if stem in BUNDLED and len(p.parts) == 1:
        return bundled(stem)
    raise ScenarioParseError(f"{path}: no such scenario file")


def bundled(name: str) -> Scenario:
    ref = resources.files("vtlsim") / "scenarios" / f"{name}.scenario"
    return load_scenario(ref.read_text(), f"{name}.scenario")
