"""Service-need generation and windowing.

Deterministic needs recur at a fixed per-satellite frequency with a seeded
random phase; random needs follow a Poisson process (exponential inter-arrival
times). Each need gets a service window of grid steps, a duration-coverage
table and a required-tool flag derived from the service type.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .network import TimeGrid
from .scenario import CustomerSat, Scenario, ServiceTypeSpec


@dataclass(frozen=True)
class ServiceNeed:
    id: str
    satellite: str              # customer satellite name
    service_type: str
    tau: float                  # occurrence date, days (continuous)
    window: tuple[int, ...] = ()        # grid steps; populated by build_window
    duration: int = 0
    revenue: float = 0.0
    delay_penalty_per_day: float = 0.0
    commodity_demand: dict[str, float] = field(default_factory=dict)
    required_tool: str = ""

    @property
    def tau_step(self) -> int:
        """Earliest admissible start step; delays are measured from here."""
        if not self.window:
            raise ValueError(f"need {self.id} has no window built")
        return self.window[0]


def _need_from_spec(need_id: str, sat: str, spec: ServiceTypeSpec,
                    tau: float) -> ServiceNeed:
    return ServiceNeed(
        id=need_id, satellite=sat, service_type=spec.id, tau=tau,
        duration=spec.duration, revenue=spec.revenue,
        delay_penalty_per_day=spec.delay_penalty_per_day,
        commodity_demand=dict(spec.commodity_demand),
        required_tool=spec.required_tool)


def _sat_rng(seed: int, sat_name: str, service_id: str) -> np.random.Generator:
    # independent, process-stable stream per (satellite, service type)
    digest = hashlib.sha256(f"{sat_name}|{service_id}".encode()).digest()
    ss = np.random.SeedSequence([seed, int.from_bytes(digest[:8], "big")])
    return np.random.default_rng(ss)


def generate_deterministic(sats: list[CustomerSat], spec: ServiceTypeSpec,
                           horizon: float, seed: int) -> list[ServiceNeed]:
    """Regularly spaced needs with a seeded random phase per satellite."""
    if spec.occurrence.kind != "deterministic":
        raise ValueError(f"service {spec.id} is not deterministic")
    freq = spec.occurrence.interval
    needs = []
    for sat in sats:
        rng = _sat_rng(seed, sat.name, spec.id)
        phase = float(rng.uniform(0.0, freq))
        k = 0
        while phase + k * freq <= horizon:
            tau = phase + k * freq
            needs.append(_need_from_spec(
                f"{sat.name}/{spec.id}/{k}", sat.name, spec, tau))
            k += 1
    return needs


def generate_random(sats: list[CustomerSat], spec: ServiceTypeSpec,
                    horizon: float, seed: int) -> list[ServiceNeed]:
    """Poisson-process needs with the configured mean inter-occurrence time."""
    if spec.occurrence.kind != "random":
        raise ValueError(f"service {spec.id} is not random")
    mean = spec.occurrence.interval
    needs = []
    for sat in sats:
        rng = _sat_rng(seed, sat.name, spec.id)
        tau = float(rng.exponential(mean))
        k = 0
        while tau <= horizon:
            needs.append(_need_from_spec(
                f"{sat.name}/{spec.id}/{k}", sat.name, spec, tau))
            tau += float(rng.exponential(mean))
            k += 1
    return needs


def build_window(need: ServiceNeed, grid: TimeGrid,
                 window_days: float) -> Optional[ServiceNeed]:
    """Attach the service window: grid steps in [snap_up(tau), tau + window).

    Returns None (need dropped) when no grid step falls inside the window.
    """
    start = grid.next_step_at_or_after(need.tau)
    if start is None:
        return None
    steps = tuple(t for t in grid.steps
                  if start <= t < need.tau + window_days)
    if not steps:
        return None
    return replace(need, window=steps)


def build_beta(need: ServiceNeed, grid: TimeGrid) -> dict[tuple[int, int], int]:
    """Duration-coverage table: beta[(start, t)] = 1 iff start <= t < start+duration."""
    beta = {}
    for start in need.window:
        for t in grid.steps:
            if start <= t < start + need.duration:
                beta[(start, t)] = 1
    return beta


def tool_flags(service_type: str, scenario: Scenario) -> dict[str, int]:
    """One-hot tool requirement vector for a service type."""
    if service_type not in scenario.services:
        raise KeyError(f"unknown service type {service_type!r}")
    tool = scenario.services[service_type].required_tool
    return {k: int(k == tool) for k in scenario.tool_ids()}


@dataclass(frozen=True)
class DemandStream:
    """All service needs over a campaign, ordered by occurrence date."""

    needs: tuple[ServiceNeed, ...]
    seed: int
    horizon: float

    def __post_init__(self):
        taus = [n.tau for n in self.needs]
        if taus != sorted(taus):
            raise ValueError("needs must be sorted by occurrence date")

    def per_satellite(self) -> dict[str, list[ServiceNeed]]:
        out: dict[str, list[ServiceNeed]] = {}
        for n in self.needs:
            out.setdefault(n.satellite, []).append(n)
        return out

    def export_csv(self, path: str | Path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["need_id", "satellite", "service_type", "tau_day"])
            for n in self.needs:
                w.writerow([n.id, n.satellite, n.service_type, repr(n.tau)])


def generate_stream(sats: list[CustomerSat], scenario: Scenario,
                    horizon: float, seed: int) -> DemandStream:
    """Generate the full demand stream over the campaign horizon."""
    needs: list[ServiceNeed] = []
    for spec in scenario.services.values():
        if spec.occurrence.kind == "deterministic":
            needs += generate_deterministic(sats, spec, horizon, seed)
        else:
            needs += generate_random(sats, spec, horizon, seed)
    needs.sort(key=lambda n: (n.tau, n.id))
    return DemandStream(needs=tuple(needs), seed=seed, horizon=horizon)


def import_stream(path: str | Path, scenario: Scenario, horizon: float,
                  seed: int = 0) -> DemandStream:
    """Reload a demand stream exported by DemandStream.export_csv."""
    needs = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            spec = scenario.services[row["service_type"]]
            needs.append(_need_from_spec(row["need_id"], row["satellite"],
                                         spec, float(row["tau_day"])))
    needs.sort(key=lambda n: (n.tau, n.id))
    return DemandStream(needs=tuple(needs), seed=seed, horizon=horizon)


def window_needs(stream_needs: Iterable[ServiceNeed], scenario: Scenario,
                 grid: TimeGrid, day_offset: float = 0.0) -> list[ServiceNeed]:
    """Clip needs to a planning grid, shifting occurrence dates by day_offset.

    Needs whose window has no grid step are dropped.
    """
    out = []
    for need in stream_needs:
        local = replace(need, tau=need.tau - day_offset)
        spec = scenario.services[need.service_type]
        built = build_window(local, grid, spec.window)
        if built is not None and built.tau >= -spec.window:
            out.append(built)
    return out
