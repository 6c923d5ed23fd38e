"""Experiment drivers behind the CLI: IPG sweep and paired controller comparison."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .channel import ChannelModel, ipg_table
from .engine import SimReport, run
from .scenario import Scenario

IPG_COLUMNS = ("distance_ft", "mean_ipg_ms", "n_received")


def benefit_pct(stop4_s: float, vtl_s: float) -> float:
    return 100.0 * (stop4_s - vtl_s) / stop4_s


@dataclass
class ComparisonReport:
    scenario: str
    seeds: list
    runs: list = field(default_factory=list)   # one entry per seed, sorted by seed
    per_vehicle_mean_benefit_pct: dict = field(default_factory=dict)
    mean_benefit_pct: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ComparisonReport:
        return cls(**json.loads(text))

    def benefits(self) -> list[float]:
        return [v["benefit_pct"] for r in self.runs for v in r["vehicles"]]


def compare(sc: Scenario, seeds: Sequence[int]) -> ComparisonReport:
    """Run both controllers on identical seeds.

    Without start jitter the stop-sign run never touches the generator, so
    one run serves every seed.
    """
    seeds = sorted(seeds)
    report = ComparisonReport(sc.name, list(seeds))
    shared_stop4: SimReport | None = None
    per_vehicle: dict[str, list[float]] = {}
    for seed in seeds:
        if sc.start_jitter_ft == 0:
            if shared_stop4 is None:
                shared_stop4 = run(sc, controller="stop4", seed=seed)
            stop4 = shared_stop4
        else:
            stop4 = run(sc, controller="stop4", seed=seed)
        vtl = run(sc, controller="vtl", seed=seed)
        rows = []
        for v in vtl.vehicles:
            s = stop4.vehicle(v["id"])["total_time_s"]
            b = benefit_pct(s, v["total_time_s"])
            rows.append({"id": v["id"], "stop4_time_s": s, "vtl_time_s": v["total_time_s"],
                         "benefit_pct": b})
            per_vehicle.setdefault(str(v["id"]), []).append(b)
        report.runs.append({"seed": seed, "vehicles": rows})
    report.per_vehicle_mean_benefit_pct = {k: sum(v) / len(v) for k, v in per_vehicle.items()}
    allb = report.benefits()
    report.mean_benefit_pct = sum(allb) / len(allb)
    return report


def ipg_rows(n_packets: int = 2000, interval_ms: int = 100, seed: int = 0,
             distances: Sequence[float] = (50, 100, 150, 200, 250, 300),
             model: ChannelModel | None = None) -> list[tuple[float, float, int]]:
    return ipg_table(distances, n_packets, interval_ms, seed, model)


def format_ipg_csv(rows: Sequence[tuple[float, float, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(IPG_COLUMNS)
    for d, ipg, n in rows:
        w.writerow((repr(float(d)), repr(float(ipg)), int(n)))
    return buf.getvalue()


def parse_ipg_csv(text: str) -> list[tuple[float, float, int]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != IPG_COLUMNS:
        raise ValueError(f"unexpected IPG header {header}")
    return [(float(d), float(ipg), int(n)) for d, ipg, n in reader]


def with_seed(sc: Scenario, seed: int) -> Scenario:
    return replace(sc, seed=seed)
