"""Static node network and its periodic time expansion.

The static network has three tiers: Earth nodes, parking nodes (depot slots)
and customer nodes, the orbital ones living on a single circular orbit so a
longitude fully describes their state. The time expansion replicates the nodes
at a periodic grid and draws holdover arcs plus transportation multiarcs
indexed by (vehicle, from, to, flight duration, trajectory option, departure).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .scenario import CustomerSat, Scenario, VehicleDesign
from .trajectory import (DAY_S, PluginRegistry, TrajectoryError,
                         TrajectoryModel, TrajectoryQuery)


class NetworkError(Exception):
    pass


@dataclass(frozen=True)
class Node:
    index: int
    tier: str                   # earth | parking | customer
    name: str
    longitude: Optional[float] = None   # deg east; None for Earth nodes


@dataclass(frozen=True)
class NodeSet:
    nodes: tuple[Node, ...]

    def __post_init__(self):
        for idx, n in enumerate(self.nodes):
            if n.index != idx:
                raise NetworkError("node indices must be dense and ordered")
            if n.tier in ("parking", "customer") and n.longitude is None:
                raise NetworkError(f"orbital node {n.name} needs a longitude")

    @property
    def earth(self) -> list[Node]:
        return [n for n in self.nodes if n.tier == "earth"]

    @property
    def parking(self) -> list[Node]:
        return [n for n in self.nodes if n.tier == "parking"]

    @property
    def customer(self) -> list[Node]:
        return [n for n in self.nodes if n.tier == "customer"]

    @property
    def orbital(self) -> list[Node]:
        return [n for n in self.nodes if n.tier in ("parking", "customer")]

    def by_name(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)


def build_nodes(scenario: Scenario, sats: list[CustomerSat],
                include_earth: bool = True) -> NodeSet:
    """Assemble Earth, parking and customer nodes for a planning run."""
    nodes: list[Node] = []
    if include_earth:
        nodes.append(Node(index=0, tier="earth", name="earth"))
    for i, lon in enumerate(scenario.network.parking_longitudes):
        nodes.append(Node(index=len(nodes), tier="parking",
                          name=f"parking_{i}", longitude=lon))
    for sat in sats:
        nodes.append(Node(index=len(nodes), tier="customer",
                          name=sat.name, longitude=sat.longitude))
    return NodeSet(tuple(nodes))


@dataclass(frozen=True)
class TimeGrid:
    period: int
    offsets: tuple[int, ...]
    horizon: int
    steps: tuple[int, ...]

    @property
    def final(self) -> int:
        return self.steps[-1]

    def index(self, t: int) -> int:
        return self.steps.index(t)

    def contains(self, t: int) -> bool:
        return t in self._step_set

    @property
    def _step_set(self) -> frozenset:
        return frozenset(self.steps)

    def delta_forward(self, t: int) -> int:
        """Length of the holdover arc starting at t; 0 at the final step."""
        i = self.index(t)
        return self.steps[i + 1] - t if i + 1 < len(self.steps) else 0

    def delta_backward(self, t: int) -> int:
        """Length of the holdover arc ending at t; 0 at the first step."""
        i = self.index(t)
        return t - self.steps[i - 1] if i > 0 else 0

    def next_step_at_or_after(self, day: float) -> Optional[int]:
        for t in self.steps:
            if t >= day:
                return t
        return None


def build_time_grid(period: int, offsets: list[int] | tuple[int, ...],
                    horizon: int) -> TimeGrid:
    """Periodic grid {k*period + o : o in {0} | offsets} clipped to [0, horizon]."""
    offsets = tuple(int(o) for o in offsets)
    if any(o1 <= o0 for o0, o1 in zip(offsets, offsets[1:])):
        raise NetworkError("offsets must be strictly increasing")
    if any(not 0 < o < period for o in offsets):
        raise NetworkError("offsets must lie strictly inside (0, period)")
    if horizon < period:
        raise NetworkError("horizon must cover at least one period")
    steps = []
    k = 0
    while k * period <= horizon:
        for o in (0,) + offsets:
            t = k * period + o
            if t <= horizon:
                steps.append(t)
        k += 1
    return TimeGrid(period=int(period), offsets=offsets, horizon=int(horizon),
                    steps=tuple(steps))


def phase_angle(from_lon: float, to_lon: float) -> float:
    """Angle by which the chaser (at from_lon) trails the target, in [0, 2*pi)."""
    return math.radians((from_lon - to_lon) % 360.0)


def signed_phase(from_lon: float, to_lon: float) -> float:
    """Shortest signed phase change from chaser to target, in (-pi, pi]."""
    d = (to_lon - from_lon) % 360.0
    if d > 180.0:
        d -= 360.0
    return math.radians(d)


@dataclass(frozen=True)
class TransportArc:
    vehicle: str
    i: int                      # origin node index
    j: int                      # destination node index
    q: int                      # time of flight, days
    r: str                      # trajectory option (propulsion mode kind, or "launch")
    t: int                      # departure step
    model: Optional[TrajectoryModel] = None     # None on launch arcs
    mass_upper_bound: float = float("inf")

    @property
    def arrival(self) -> int:
        return self.t + self.q

    @property
    def key(self) -> tuple:
        return (self.vehicle, self.i, self.j, self.q, self.r, self.t)

    @property
    def is_launch(self) -> bool:
        return self.r == "launch"


@dataclass(frozen=True)
class DynamicNetwork:
    nodes: NodeSet
    grid: TimeGrid
    arcs: tuple[TransportArc, ...]

    def __post_init__(self):
        for a in self.arcs:
            if not (self.grid.contains(a.t) and self.grid.contains(a.arrival)):
                raise NetworkError(f"arc {a.key} not aligned to the grid")

    def arcs_for(self, vehicle: str) -> list[TransportArc]:
        return [a for a in self.arcs if a.vehicle == vehicle]

    def arcs_departing(self, vehicle: str, i: int, t: int) -> list[TransportArc]:
        return [a for a in self.arcs
                if a.vehicle == vehicle and a.i == i and a.t == t]

    def arcs_arriving(self, vehicle: str, j: int, t: int) -> list[TransportArc]:
        return [a for a in self.arcs
                if a.vehicle == vehicle and a.j == j and a.arrival == t]

    def dump_csv(self, path: str | Path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vehicle", "from", "to", "q_days", "option",
                        "depart_day", "arrive_day", "mass_upper_bound_kg"])
            for a in self.arcs:
                w.writerow([a.vehicle, self.nodes.nodes[a.i].name,
                            self.nodes.nodes[a.j].name, a.q, a.r, a.t,
                            a.arrival, f"{a.mass_upper_bound:.3f}"])


def _mass_range(vehicle: VehicleDesign, scenario: Scenario) -> tuple[float, float]:
    """Wet-mass range of a servicer: dry mass up to dry plus full loadout."""
    payload = sum(cap * scenario.unit_mass(k)
                  for k, cap in vehicle.capacities.items())
    return vehicle.dry_mass, vehicle.dry_mass + payload


def expand(nodes: NodeSet, grid: TimeGrid, scenario: Scenario,
           registry: Optional[PluginRegistry] = None,
           n_breakpoints: int = 20,
           launch_vehicles: Optional[list[str]] = None) -> DynamicNetwork:
    """Expand the static network into the full set of transportation multiarcs.

    For every servicer, ordered orbital node pair, propulsion mode, flight
    duration and grid-aligned departure, one arc is created carrying the
    trajectory model computed by the registered plugin. Trajectory models are
    cached per (vehicle, mode, duration, phase angle) since the propellant
    depends only on the phase geometry, not node identity. Arcs whose mass
    upper bound falls below the servicer dry mass are pruned. Launch arcs run
    Earth to parking at the configured cadence for the launcher plus any
    vehicle listed in ``launch_vehicles``.
    """
    registry = registry or PluginRegistry.default()
    eco = scenario.economics
    r_orbit = eco.geo_radius_km * 1e3
    r_forb = eco.forbidden_radius_km * 1e3
    arcs: list[TransportArc] = []
    cache: dict[tuple, Optional[TrajectoryModel]] = {}
    orbital = nodes.orbital

    for veh in scenario.servicers:
        m_lo, m_hi = _mass_range(veh, scenario)
        for mode in veh.propulsion:
            plugin = registry.get(mode.kind)
            for q in mode.flight_durations:
                departures = [t for t in grid.steps
                              if grid.contains(t + q) and t + q <= grid.horizon]
                if not departures:
                    raise NetworkError(
                        f"flight duration {q} d of {veh.id}/{mode.kind} never "
                        f"lands on the grid")
                for ni in orbital:
                    for nj in orbital:
                        if ni.index == nj.index:
                            continue
                        alpha = phase_angle(ni.longitude, nj.longitude)
                        key = (veh.id, mode.kind, q, round(alpha, 12))
                        if key not in cache:
                            query = TrajectoryQuery(
                                phase_angle=alpha,
                                signed_phase=signed_phase(ni.longitude, nj.longitude),
                                orbit_radius=r_orbit,
                                time_of_flight=q * DAY_S,
                                isp=mode.isp, thrust=mode.thrust,
                                g0=eco.g0, mu=eco.mu_earth,
                                forbidden_radius=r_forb,
                                mass_min=m_lo, mass_max=m_hi)
                            try:
                                if mode.kind == "low_thrust":
                                    model = plugin(query, n_breakpoints)
                                else:
                                    model = plugin(query)
                            except TrajectoryError:
                                model = None    # arc infeasible for this geometry
                            cache[key] = model
                        model = cache[key]
                        if model is None or model.mass_upper_bound < veh.dry_mass:
                            continue
                        for t in departures:
                            arcs.append(TransportArc(
                                vehicle=veh.id, i=ni.index, j=nj.index, q=q,
                                r=mode.kind, t=t, model=model,
                                mass_upper_bound=model.mass_upper_bound))

    # launch arcs: Earth -> parking at the launcher cadence
    if nodes.earth:
        launch_ids = [v.id for v in scenario.launchers]
        launch_ids += [vid for vid in (launch_vehicles or []) if vid not in launch_ids]
        q0 = scenario.network.launch_duration
        cadence = eco.launcher_cadence
        launch_steps = [t for t in grid.steps
                        if t % cadence == 0 and grid.contains(t + q0)]
        for vid in launch_ids:
            for ne in nodes.earth:
                for np_ in nodes.parking:
                    for t in launch_steps:
                        arcs.append(TransportArc(
                            vehicle=vid, i=ne.index, j=np_.index, q=q0,
                            r="launch", t=t))
    return DynamicNetwork(nodes=nodes, grid=grid, arcs=tuple(arcs))
