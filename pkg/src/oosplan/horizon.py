"""Rolling-horizon campaign simulation with an economic ledger.

The campaign advances in commit intervals: each step plans over a finite
look-ahead window, commits only the decisions falling inside the next commit
interval, advances the world state from the solved flows, and books the
committed cash events. Deterministic needs become visible a full window ahead;
random needs only once they occur.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .demand import DemandStream, ServiceNeed, window_needs
from .milp import (CommittedService, InitialState, PendingArrival, PlanProblem,
                   Schedule, SolveOptions, audit, extract_schedule, vn)
from .network import build_nodes, build_time_grid, expand
from .scenario import CustomerSat, Scenario
from .trajectory import PluginRegistry


class CampaignError(Exception):
    pass


@dataclass
class RhConfig:
    window_days: int = 90
    commit_days: Optional[int] = None    # default: one grid period
    gap: float = 0.01
    n_breakpoints: int = 20
    backend: str = "highs"
    time_limit: Optional[float] = None
    audit_each_step: bool = True
    #: initial on-board loads per vehicle; None fills every capacity
    initial_loads: Optional[dict[str, dict[str, float]]] = None


@dataclass(frozen=True)
class InFlight:
    vehicle: str
    node: str
    arrive_day: int             # absolute campaign day
    commodities: dict[str, float]


@dataclass(frozen=True)
class ActiveService:
    vehicle: str
    node: str
    need_id: str
    start_day: float            # absolute campaign days
    end_day: float


@dataclass
class WorldState:
    day: int = 0
    vehicle_nodes: dict[str, str] = field(default_factory=dict)
    commodities: dict[str, dict[str, float]] = field(default_factory=dict)
    in_flight: list[InFlight] = field(default_factory=list)
    committed: list[ActiveService] = field(default_factory=list)
    served: set[str] = field(default_factory=set)
    lost: set[str] = field(default_factory=set)


COST_BUCKETS = ("launch", "pdm", "delay", "depot_ops", "servicer_ops")


@dataclass(frozen=True)
class Booking:
    day: float                  # absolute campaign day
    bucket: str                 # "revenues" or a cost bucket
    amount: float
    label: str = ""


@dataclass(frozen=True)
class LedgerRow:
    day: int
    revenues: float
    launch: float
    pdm: float
    delay: float
    depot_ops: float
    servicer_ops: float
    value: float


@dataclass
class Ledger:
    """Cumulative cash position over a campaign.

    The row value at any day equals revenues to date minus the initial
    investment minus every cost booked to date.
    """

    initial_investment: float = 0.0
    bookings: list[Booking] = field(default_factory=list)

    def book(self, day: float, bucket: str, amount: float, label: str = ""):
        if amount != 0.0:
            self.bookings.append(Booking(day, bucket, amount, label))

    def total(self, bucket: str) -> float:
        return sum(b.amount for b in self.bookings if b.bucket == bucket)

    def value(self) -> float:
        return self.total("revenues") - self.initial_investment \
            - sum(self.total(b) for b in COST_BUCKETS)

    def rows(self, days: list[int]) -> list[LedgerRow]:
        """Cumulative rows at the given day boundaries.

        A booking on day d is included in the first row with day > d; the
        final row absorbs any booking at or beyond the last boundary.
        """
        out = []
        acc = {b: 0.0 for b in ("revenues",) + COST_BUCKETS}
        remaining = sorted(self.bookings, key=lambda b: b.day)
        pos = 0
        for n, boundary in enumerate(days):
            last = n == len(days) - 1
            while pos < len(remaining) and (remaining[pos].day < boundary
                                            or last):
                acc[remaining[pos].bucket] += remaining[pos].amount
                pos += 1
            value = acc["revenues"] - self.initial_investment \
                - sum(acc[b] for b in COST_BUCKETS)
            out.append(LedgerRow(day=boundary, value=value,
                                 **{b: acc[b] for b in acc}))
        return out

    def export_csv(self, path: str | Path, days: list[int]):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["day", "revenues", "launch", "pdm", "delay",
                        "depot_ops", "servicer_ops", "value"])
            for row in self.rows(days):
                w.writerow([row.day] + [repr(getattr(row, b)) for b in
                                        ("revenues", "launch", "pdm", "delay",
                                         "depot_ops", "servicer_ops", "value")])


@dataclass
class StepResult:
    day: int
    schedule: Schedule
    committed_events: list
    objective: Optional[float]


@dataclass
class CampaignResult:
    ledger: Ledger
    state: WorldState
    steps: list[StepResult]
    boundaries: list[int]

    @property
    def value(self) -> float:
        return self.ledger.value()

    def export_ledger(self, path: str | Path):
        self.ledger.export_csv(path, self.boundaries)


def initial_state(scenario: Scenario, config: RhConfig) -> tuple[WorldState, float]:
    """Deploy vehicles per the scenario and price the initial investment."""
    parking_by_lon = {lon: f"parking_{i}" for i, lon in
                      enumerate(scenario.network.parking_longitudes)}
    state = WorldState()
    investment = 0.0
    for dep in scenario.deployments:
        v = scenario.vehicles[dep.vehicle]
        node = parking_by_lon.get(dep.longitude)
        if node is None:
            raise CampaignError(
                f"deployment of {dep.vehicle}: no parking slot at longitude "
                f"{dep.longitude}")
        state.vehicle_nodes[dep.vehicle] = node
        if config.initial_loads and dep.vehicle in config.initial_loads:
            loads = dict(config.initial_loads[dep.vehicle])
        else:
            loads = dict(v.capacities)
        state.commodities[dep.vehicle] = loads
        investment += v.manufacturing_cost
        investment += sum(scenario.commodities[k].purchase_cost * qty
                          for k, qty in loads.items())
    return state, investment


def visible_needs(stream: DemandStream, scenario: Scenario, state: WorldState,
                  window_days: int) -> list[ServiceNeed]:
    committed_ids = {c.need_id for c in state.committed}
    out = []
    for need in stream.needs:
        if need.id in state.served or need.id in state.lost \
                or need.id in committed_ids:
            continue
        spec = scenario.services[need.service_type]
        if spec.occurrence.kind == "deterministic":
            if need.tau >= state.day + window_days:
                continue
        else:
            if need.tau > state.day:
                continue
        out.append(need)
    return out


def _local_problem(scenario: Scenario, sats: list[CustomerSat],
                   stream: DemandStream, state: WorldState,
                   config: RhConfig,
                   registry: Optional[PluginRegistry] = None
                   ) -> tuple[PlanProblem, list[ServiceNeed]]:
    grid = build_time_grid(scenario.network.period, scenario.network.offsets,
                           config.window_days)
    candidates = visible_needs(stream, scenario, state, config.window_days)
    local = window_needs(candidates, scenario, grid, day_offset=state.day)
    # needs whose admissible window has entirely passed are lost for good
    live = {n.id for n in local}
    for need in candidates:
        spec = scenario.services[need.service_type]
        if need.id not in live and need.tau + spec.window <= state.day:
            state.lost.add(need.id)

    active_sats = {n.satellite for n in local}
    active_sats |= {c.node for c in state.committed}
    active_sats |= {f.node for f in state.in_flight}
    active_sats |= set(state.vehicle_nodes.values())
    sats_local = [s for s in sats if s.name in active_sats]
    local = [n for n in local if n.satellite in {s.name for s in sats_local}]

    nodes = build_nodes(scenario, sats_local, include_earth=True)
    net = expand(nodes, grid, scenario, registry=registry,
                 n_breakpoints=config.n_breakpoints)
    init = InitialState(
        vehicle_nodes=dict(state.vehicle_nodes),
        commodities={v: dict(loads) for v, loads in state.commodities.items()},
        pending_arrivals=tuple(
            PendingArrival(vehicle=f.vehicle, node=f.node,
                           t=f.arrive_day - state.day,
                           commodities=dict(f.commodities))
            for f in state.in_flight),
        committed=tuple(
            CommittedService(vehicle=c.vehicle, node=c.node,
                             start_day=c.start_day - state.day,
                             end_day=c.end_day - state.day,
                             need_id=c.need_id)
            for c in state.committed))
    options = SolveOptions(gap=config.gap, time_limit=config.time_limit,
                           backend=config.backend)
    problem = PlanProblem(scenario, net, local, init, options)
    return problem, local


def _committed_event_set(schedule: Schedule, commit: int) -> list:
    """Events inside the commit interval, plus service starts already en route."""
    committed = [e for e in schedule.events if e.day < commit]
    flights = {(e.vehicle, e.detail["to"], e.detail["arrive_day"])
               for e in committed if e.kind == "flight"}
    for e in schedule.events:
        if e.kind == "service_start" and e.day >= commit:
            if (e.vehicle, e.detail["satellite"], e.day) in flights:
                committed.append(e)
    return committed


def step(scenario: Scenario, sats: list[CustomerSat], stream: DemandStream,
         state: WorldState, ledger: Ledger, config: RhConfig,
         registry: Optional[PluginRegistry] = None) -> StepResult:
    """Plan one window, commit one interval, and advance the world state."""
    commit = config.commit_days or scenario.network.period
    problem, _ = _local_problem(scenario, sats, stream, state, config, registry)
    solution = problem.solve()
    if not solution.feasible:
        raise CampaignError(
            f"planning window at day {state.day} is {solution.status}")
    if config.audit_each_step:
        violations = audit(problem, solution.values)
        if violations:
            raise CampaignError(
                f"solution audit failed at day {state.day}: {violations[:5]}")
    schedule = extract_schedule(problem, solution)
    committed = _committed_event_set(schedule, commit)
    day0 = state.day
    scn = scenario

    for e in committed:
        abs_day = day0 + e.day
        if e.kind == "launch":
            cargo_mass = sum(scn.unit_mass(k) * q
                             for k, q in e.detail["cargo"].items())
            v = scn.vehicles[e.vehicle]
            ledger.book(abs_day, "launch",
                        scn.economics.launch_cost_per_kg
                        * (cargo_mass + v.dry_mass), e.vehicle)
            ledger.book(abs_day, "pdm",
                        v.manufacturing_cost + sum(
                            scn.commodities[k].purchase_cost * q
                            for k, q in e.detail["cargo"].items()), e.vehicle)
        elif e.kind == "service_start":
            need_id = e.detail["need"]
            ledger.book(abs_day, "revenues", e.detail["revenue"], need_id)
            delay = e.detail["delay_days"]
            if delay > 0:
                spec = scn.services[e.detail["service_type"]]
                ledger.book(abs_day, "delay",
                            spec.delay_penalty_per_day * delay, need_id)
            state.served.add(need_id)
            state.committed.append(ActiveService(
                vehicle=e.vehicle, node=e.detail["satellite"],
                need_id=need_id, start_day=abs_day,
                end_day=day0 + e.detail["end_day"]))

    # continuous operating cost for every deployed vehicle over the interval
    for vid in sorted(set(state.vehicle_nodes)
                      | {f.vehicle for f in state.in_flight}):
        v = scn.vehicles[vid]
        bucket = "depot_ops" if v.vehicle_class == "depot" else "servicer_ops"
        ledger.book(day0, bucket, v.operating_cost_per_day * commit, vid)

    _advance_state(problem, solution, state, commit)
    state.day = day0 + commit
    state.committed = [c for c in state.committed if c.end_day > state.day]
    return StepResult(day=day0, schedule=schedule, committed_events=committed,
                      objective=solution.objective)


def _advance_state(problem: PlanProblem, solution, state: WorldState,
                   commit: int):
    """Read the post-interval world directly from the solved flows."""
    values = solution.values
    names = {n.index: n.name for n in problem.net.nodes.nodes}
    new_nodes: dict[str, str] = {}
    new_comms: dict[str, dict[str, float]] = {}
    new_flight: list[InFlight] = []

    for vid in problem.active:
        located = None
        departing = []
        for i in problem.presence[vid]:
            if values.get(vn("Y", vid, i, commit), 0.0) > 0.5:
                located = i
                break
            # a departure at exactly the boundary is not committed yet, so
            # the vehicle still counts as parked at its origin
            for a in problem.dep_arcs.get((vid, i, commit), ()):
                if values.get(vn("W", *a.key), 0.0) > 0.5:
                    located, departing = i, [a]
                    break
            if located is not None:
                break
        if located is not None:
            new_nodes[vid] = names[located]
            stock = {
                k: values.get(vn("X", vid, located, commit, k), 0.0)
                for k in problem.carriable[vid]}
            for a in departing:
                for k in problem.carriable[vid]:
                    stock[k] += values.get(vn("U", *a.key, k), 0.0)
            new_comms[vid] = stock
            continue
        pending = next((p for p in problem.init.pending_arrivals
                        if p.vehicle == vid and p.t > commit), None)
        if pending is not None:
            new_flight.append(InFlight(
                vehicle=vid, node=pending.node,
                arrive_day=state.day + pending.t,
                commodities=dict(pending.commodities)))
            continue
        for a in problem.arcs:
            if a.vehicle != vid or a.is_launch:
                continue
            if a.t < commit < a.arrival \
                    and values.get(vn("W", *a.key), 0.0) > 0.5:
                cargo = {k: _arrival_amount(problem, values, a, k)
                         for k in problem.carriable[vid]}
                new_flight.append(InFlight(
                    vehicle=vid, node=names[a.j],
                    arrive_day=state.day + a.arrival, commodities=cargo))
                break
        else:
            raise CampaignError(
                f"vehicle {vid} is neither parked nor in flight at the "
                f"commit boundary")

    # launch cargo still in flight at the boundary
    for a in problem.arcs:
        if a.is_launch and a.vehicle in problem.launchers \
                and a.t < commit < a.arrival \
                and values.get(vn("W", *a.key), 0.0) > 0.5:
            cargo = {k: values.get(vn("U", *a.key, k), 0.0)
                     for k in problem.carriable[a.vehicle]}
            cargo = {k: v for k, v in cargo.items() if v > 1e-9}
            if cargo:
                new_flight.append(InFlight(
                    vehicle=a.vehicle, node=names[a.j],
                    arrive_day=state.day + a.arrival, commodities=cargo))

    state.vehicle_nodes = new_nodes
    state.commodities = new_comms
    state.in_flight = new_flight


def _arrival_amount(problem: PlanProblem, values: dict, a, k: str) -> float:
    amount = values.get(vn("U", *a.key, k), 0.0)
    mode = problem._mode_of(a)
    if mode is not None and k == mode.propellant_commodity:
        for name, coeff in problem.arc_consumption(a).items():
            amount -= coeff * values.get(name, 0.0)
    return max(amount, 0.0)


def run(scenario: Scenario, sats: list[CustomerSat], stream: DemandStream,
        horizon_days: int, config: Optional[RhConfig] = None,
        registry: Optional[PluginRegistry] = None) -> CampaignResult:
    """Simulate a full campaign and return its ledger and event history."""
    config = config or RhConfig()
    commit = config.commit_days or scenario.network.period
    if commit <= 0 or commit % scenario.network.period != 0:
        raise CampaignError("commit interval must be a multiple of the grid "
                            "period")
    state, investment = initial_state(scenario, config)
    ledger = Ledger(initial_investment=investment)
    steps: list[StepResult] = []
    boundaries: list[int] = []
    while state.day < horizon_days:
        steps.append(step(scenario, sats, stream, state, ledger, config,
                          registry))
        boundaries.append(state.day)
    return CampaignResult(ledger=ledger, state=state, steps=steps,
                          boundaries=boundaries)
