"""MILP assembly and solution handling for one planning horizon.

Builds the time-expanded multi-commodity flow model over a DynamicNetwork and
a set of service needs: profit objective, mass balances, payload concurrency,
propellant transformation (linear for high-thrust arcs, piecewise-linear with
adjacency-encoded SOS2 weights for low-thrust arcs), service management and
flight rules. Inflow ("minus") variables are substituted out through the arc
transformation relations, which keeps the model smaller and makes the
transformation constraints hold by construction; nonnegativity of the
substituted inflows is enforced explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .demand import ServiceNeed, build_beta
from .lp import BINARY, CONTINUOUS, INTEGER, Model
from .network import DynamicNetwork, TransportArc
from .scenario import Scenario, VehicleDesign

INT_TOL = 1e-6


class ModelError(Exception):
    pass


def vn(tag: str, *parts) -> str:
    return tag + "[" + "|".join(str(p) for p in parts) + "]"


@dataclass(frozen=True)
class PendingArrival:
    """A vehicle (with cargo) already in flight toward a node at horizon start."""
    vehicle: str
    node: str
    t: int                      # arrival step on the local grid
    commodities: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CommittedService:
    """A service started in a previous horizon that still occupies a servicer."""
    vehicle: str
    node: str                   # customer satellite name
    end_day: float              # local day at which the service completes
    need_id: str = ""
    start_day: float = 0.0      # local day at which the service began


@dataclass(frozen=True)
class InitialState:
    vehicle_nodes: dict[str, str] = field(default_factory=dict)
    commodities: dict[str, dict[str, float]] = field(default_factory=dict)
    pending_arrivals: tuple[PendingArrival, ...] = ()
    committed: tuple[CommittedService, ...] = ()
    #: vehicles launchable from Earth: id -> max count per launch step
    vehicle_supply: dict[str, int] = field(default_factory=dict)

    def validate(self, scenario: Scenario):
        for v, loads in self.commodities.items():
            design = scenario.vehicles[v]
            for k, qty in loads.items():
                cap = design.capacities.get(k, 0.0)
                if qty > cap + 1e-9:
                    raise ModelError(
                        f"initial load of {k} on {v} exceeds capacity "
                        f"({qty} > {cap})")


@dataclass
class SolveOptions:
    gap: float = 0.01
    time_limit: Optional[float] = None
    backend: str = "highs"       # "highs" or a shell command with {lp}/{sol}
    earth_commodity_supply: float = 1e7


@dataclass
class Solution:
    status: str
    objective: Optional[float]
    values: dict[str, float]
    gap: Optional[float] = None
    components: dict[str, float] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "gap-stopped")


class PlanProblem:
    """One MILP instance over a dynamic network, needs and an initial state."""

    def __init__(self, scenario: Scenario, net: DynamicNetwork,
                 needs: list[ServiceNeed],
                 init: Optional[InitialState] = None,
                 options: Optional[SolveOptions] = None):
        self.scenario = scenario
        self.net = net
        self.needs = list(needs)
        self.init = init or InitialState()
        self.options = options or SolveOptions()
        self.init.validate(scenario)
        self.grid = net.grid
        self.nodes = net.nodes
        self._prepare()
        self.model = Model("oos-plan")
        self._build()

    # -- index preparation -------------------------------------------------

    def _prepare(self):
        scn, net = self.scenario, self.net
        self.node_by_name = {n.name: n for n in self.nodes.nodes}
        # active vehicles: deployed now or launchable from Earth
        self.active: dict[str, VehicleDesign] = {}
        for v in list(scn.servicers) + list(scn.depots):
            deployed = v.id in self.init.vehicle_nodes
            arriving = any(p.vehicle == v.id for p in self.init.pending_arrivals)
            supplied = self.init.vehicle_supply.get(v.id, 0) > 0
            if deployed or arriving or supplied:
                self.active[v.id] = v
        self.launchers = {v.id: v for v in scn.launchers}

        self.presence: dict[str, list[int]] = {}
        for vid, v in self.active.items():
            if v.vehicle_class == "depot":
                self.presence[vid] = [self.node_by_name[self.init.vehicle_nodes[vid]].index]
            else:
                self.presence[vid] = [n.index for n in self.nodes.orbital]

        self.carriable: dict[str, list[str]] = {
            vid: [k for k, cap in v.capacities.items() if cap > 0]
            for vid, v in {**self.active, **self.launchers}.items()}

        # usable arcs
        def usable(a: TransportArc) -> bool:
            if a.vehicle in self.active:
                return True
            if a.vehicle in self.launchers:
                return a.is_launch
            return False

        self.arcs = [a for a in net.arcs if usable(a)]
        # launch arcs for vehicles with zero Earth supply are dead weight
        self.arcs = [a for a in self.arcs
                     if not (a.is_launch and a.vehicle not in self.launchers
                             and self.init.vehicle_supply.get(a.vehicle, 0) == 0)]
        self.dep_arcs: dict[tuple, list[TransportArc]] = {}
        self.arr_arcs: dict[tuple, list[TransportArc]] = {}
        for a in self.arcs:
            self.dep_arcs.setdefault((a.vehicle, a.i, a.t), []).append(a)
            self.arr_arcs.setdefault((a.vehicle, a.j, a.arrival), []).append(a)

        # needs: capable vehicles, windows, beta tables
        self.need_by_id = {n.id: n for n in self.needs}
        self.needs_at: dict[int, list[ServiceNeed]] = {}
        self.beta: dict[str, dict[tuple[int, int], int]] = {}
        self.capable: dict[str, list[str]] = {}
        for need in self.needs:
            node = self.node_by_name.get(need.satellite)
            if node is None or node.tier != "customer":
                raise ModelError(f"need {need.id}: unknown customer node "
                                 f"{need.satellite!r}")
            if not need.window:
                raise ModelError(f"need {need.id} has no service window")
            self.needs_at.setdefault(node.index, []).append(need)
            self.beta[need.id] = build_beta(need, self.grid)
            self.capable[need.id] = [
                vid for vid, v in self.active.items()
                if v.is_servicer and v.capacities.get(need.required_tool, 0) > 0]
        # L_i: union of windows per customer node
        self.window_union: dict[int, set[int]] = {
            i: set().union(*[set(n.window) for n in needs_i])
            for i, needs_i in self.needs_at.items()}
        self.committed_at: dict[tuple[str, int], list[CommittedService]] = {}
        for c in self.init.committed:
            node = self.node_by_name[c.node]
            self.committed_at.setdefault((c.vehicle, node.index), []).append(c)

    def _pinned(self, vid: str, i: int, t: int) -> int:
        for c in self.committed_at.get((vid, i), ()):
            if c.start_day <= t < self._pin_end(vid, i, c.end_day):
                return 1
        return 0

    def _pin_end(self, vid: str, i: int, end_day: float) -> float:
        """First step at which a committed servicer can leave its customer.

        Occupancy stays pinned until a departure arc exists, so a service
        ending near the horizon edge does not strand the vehicle infeasibly.
        """
        for t in self.grid.steps:
            if t >= end_day and self.dep_arcs.get((vid, i, t)):
                return t
        return self.grid.final + 1

    def _mode_of(self, arc: TransportArc):
        if arc.is_launch:
            return None
        return self.scenario.vehicles[arc.vehicle].mode(arc.r)

    # -- variable creation -------------------------------------------------

    def _build(self):
        m = self.model
        scn = self.scenario
        grid = self.grid
        self.lt_points: dict[tuple, list[tuple[float, float]]] = {}

        for vid, v in self.active.items():
            for i in self.presence[vid]:
                for t in grid.steps:
                    m.add_var(vn("Y", vid, i, t), kind=BINARY)
                    for k in self.carriable[vid]:
                        kind = INTEGER if scn.commodities[k].is_integer else CONTINUOUS
                        m.add_var(vn("X", vid, i, t, k), ub=v.capacities[k],
                                  kind=kind)
        for a in self.arcs:
            m.add_var(vn("W", *a.key), kind=BINARY)
            caps = (self.launchers.get(a.vehicle) or self.active[a.vehicle]).capacities
            for k in self.carriable[a.vehicle]:
                kind = INTEGER if scn.commodities[k].is_integer else CONTINUOUS
                m.add_var(vn("U", *a.key, k), ub=caps[k], kind=kind)
            if not a.is_launch:
                ub = a.mass_upper_bound if math.isfinite(a.mass_upper_bound) else 1e9
                m.add_var(vn("Z", *a.key), ub=ub)
                if a.r == "low_thrust":
                    pts = [(0.0, 0.0)] + list(a.model.breakpoints)
                    self.lt_points[a.key] = pts
                    for n in range(len(pts)):
                        m.add_var(vn("L", *a.key, n), ub=1.0)
                    for n in range(len(pts) - 1):
                        m.add_var(vn("G", *a.key, n), kind=BINARY)
        for need in self.needs:
            for vid in self.capable[need.id]:
                for tau in need.window:
                    m.add_var(vn("H", vid, need.id, tau), kind=BINARY)
                for t in grid.steps:
                    if any(self.beta[need.id].get((tau, t), 0)
                           for tau in need.window):
                        m.add_var(vn("B", vid, need.id, t), kind=BINARY)
        for vid in self.active:
            start = self.init.vehicle_nodes.get(vid)
            if start is not None and self.node_by_name[start].tier == "customer" \
                    and not self._pinned(vid, self.node_by_name[start].index, 0):
                m.add_var(vn("S0", vid), ub=1.0)

        # fix depot presence
        for vid, v in self.active.items():
            if v.vehicle_class == "depot":
                i = self.presence[vid][0]
                for t in grid.steps:
                    m.fix(m.index(vn("Y", vid, i, t)), 1.0)

        self._add_balances()
        self._add_concurrency()
        self._add_transformation()
        self._add_service_management()
        self._add_flight_rules()
        self._add_objective()

    # -- substituted inflow expressions ------------------------------------

    def arc_consumption(self, a: TransportArc) -> dict[str, float]:
        """Linear expression (var name -> coeff) for propellant burned on arc."""
        if a.is_launch:
            return {}
        if a.r == "high_thrust":
            return {vn("Z", *a.key): a.model.metadata["burn_fraction"]}
        pts = self.lt_points[a.key]
        return {vn("L", *a.key, n): f for n, (b, f) in enumerate(pts) if f != 0.0}

    def arc_inflow(self, a: TransportArc, k: str) -> dict[str, float]:
        """Commodity k arriving at the arc head, as an expression in outflows."""
        expr = {vn("U", *a.key, k): 1.0}
        mode = self._mode_of(a)
        if mode is not None and k == mode.propellant_commodity:
            for name, coeff in self.arc_consumption(a).items():
                expr[name] = expr.get(name, 0.0) - coeff
        return expr

    def arc_vehicle_inflow(self, a: TransportArc) -> dict[str, float]:
        if a.vehicle in self.launchers:
            return {}               # launch vehicles are expended on arrival
        return {vn("W", *a.key): 1.0}

    def holdover_inflow(self, vid: str, i: int, t_prev: int, k: str) -> dict[str, float]:
        expr = {vn("X", vid, i, t_prev, k): 1.0}
        v = self.active[vid]
        if v.station_keeping_rate > 0 and k == v.station_keeping_commodity:
            dt = self.grid.delta_forward(t_prev)
            if dt > 0:
                expr[vn("Y", vid, i, t_prev)] = -v.station_keeping_rate * dt
        return expr

    # -- constraint families -----------------------------------------------

    def _coeffs(self, expr: dict[str, float]) -> dict[int, float]:
        return {self.model.index(nm): c for nm, c in expr.items()}

    def _add_expr(self, into: dict[str, float], expr: dict[str, float],
                  sign: float = 1.0):
        for nm, c in expr.items():
            into[nm] = into.get(nm, 0.0) + sign * c

    def _init_stock(self, vid: str, i: int, k: str, t: int) -> float:
        total = 0.0
        if t == self.grid.steps[0]:
            if self.init.vehicle_nodes.get(vid) is not None \
                    and self.node_by_name[self.init.vehicle_nodes[vid]].index == i:
                total += self.init.commodities.get(vid, {}).get(k, 0.0)
        for p in self.init.pending_arrivals:
            if p.vehicle == vid and p.t == t \
                    and self.node_by_name[p.node].index == i:
                total += p.commodities.get(k, 0.0)
        return total

    def _init_presence(self, vid: str, i: int, t: int) -> float:
        total = 0.0
        if t == self.grid.steps[0]:
            start = self.init.vehicle_nodes.get(vid)
            if start is not None and self.node_by_name[start].index == i:
                total += 1.0
        for p in self.init.pending_arrivals:
            if p.vehicle == vid and p.t == t \
                    and self.node_by_name[p.node].index == i:
                total += 1.0
        return total

    def _commodity_outflow_row(self, vid: str, i: int, t: int,
                               k: str) -> dict[str, float]:
        """LHS of a mass balance: holdover out + transport out - all inflows."""
        row: dict[str, float] = {}
        if vn("X", vid, i, t, k) in self.model:
            row[vn("X", vid, i, t, k)] = 1.0
            tp = t - self.grid.delta_backward(t)
            if tp != t:
                self._add_expr(row, self.holdover_inflow(vid, i, tp, k), -1.0)
        for a in self.dep_arcs.get((vid, i, t), ()):
            if k in self.carriable[a.vehicle]:
                row[vn("U", *a.key, k)] = row.get(vn("U", *a.key, k), 0.0) + 1.0
        for a in self.arr_arcs.get((vid, i, t), ()):
            if k in self.carriable[a.vehicle]:
                self._add_expr(row, self.arc_inflow(a, k), -1.0)
        return row

    def _add_balances(self):
        m, grid, scn = self.model, self.grid, self.scenario
        vids_all = list(self.active) + list(self.launchers)

        # commodity balance at customer nodes, per servicer
        for node in self.nodes.customer:
            i = node.index
            for vid, v in self.active.items():
                if not v.is_servicer:
                    continue
                for t in grid.steps:
                    for k in self.carriable[vid]:
                        row = self._commodity_outflow_row(vid, i, t, k)
                        rhs = self._init_stock(vid, i, k, t)
                        for need in self.needs_at.get(i, ()):
                            mag = need.commodity_demand.get(k, 0.0)
                            if mag and t in need.window \
                                    and vid in self.capable[need.id]:
                                # nonpositive demand: delivery leaves the servicer
                                row[vn("H", vid, need.id, t)] = \
                                    row.get(vn("H", vid, need.id, t), 0.0) + mag
                        if row:
                            m.add_constr(f"bal_cust[{vid}|{i}|{t}|{k}]",
                                         self._coeffs(row), "==", rhs)

        # commodity balance at parking nodes, pooled over vehicles
        all_k = list(scn.commodities)
        for node in self.nodes.parking:
            i = node.index
            for t in grid.steps:
                for k in all_k:
                    row: dict[str, float] = {}
                    rhs = 0.0
                    for vid in vids_all:
                        self._add_expr(row, self._commodity_outflow_row(vid, i, t, k))
                        rhs += self._init_stock(vid, i, k, t)
                    if row:
                        m.add_constr(f"bal_park[{i}|{t}|{k}]",
                                     self._coeffs(row), "==", rhs)

        # Earth commodity supply caps
        sigma = self.options.earth_commodity_supply
        for node in self.nodes.earth:
            i = node.index
            for t in grid.steps:
                for k in all_k:
                    row: dict[str, float] = {}
                    for vid in vids_all:
                        for a in self.dep_arcs.get((vid, i, t), ()):
                            if k in self.carriable[a.vehicle]:
                                row[vn("U", *a.key, k)] = 1.0
                    if row:
                        m.add_constr(f"supply[{i}|{t}|{k}]",
                                     self._coeffs(row), "<=", sigma)

        # vehicle balances at orbital nodes
        for vid, v in self.active.items():
            for i in self.presence[vid]:
                for t in grid.steps:
                    row = {vn("Y", vid, i, t): 1.0}
                    tp = t - grid.delta_backward(t)
                    if tp != t:
                        row[vn("Y", vid, i, tp)] = row.get(vn("Y", vid, i, tp), 0.0) - 1.0
                    for a in self.dep_arcs.get((vid, i, t), ()):
                        row[vn("W", *a.key)] = row.get(vn("W", *a.key), 0.0) + 1.0
                    for a in self.arr_arcs.get((vid, i, t), ()):
                        self._add_expr(row, self.arc_vehicle_inflow(a), -1.0)
                    m.add_constr(f"bal_veh[{vid}|{i}|{t}]", self._coeffs(row),
                                 "==", self._init_presence(vid, i, t))

        # Earth vehicle supply
        for node in self.nodes.earth:
            i = node.index
            for t in grid.steps:
                for vid in vids_all:
                    deps = self.dep_arcs.get((vid, i, t), ())
                    if not deps:
                        continue
                    cap = 1 if vid in self.launchers else \
                        self.init.vehicle_supply.get(vid, 0)
                    row = {vn("W", *a.key): 1.0 for a in deps}
                    m.add_constr(f"veh_supply[{vid}|{i}|{t}]",
                                 self._coeffs(row), "<=", cap)

    def _add_concurrency(self):
        m = self.model
        # holdover capacity
        for vid, v in self.active.items():
            for i in self.presence[vid]:
                for t in self.grid.steps:
                    for k in self.carriable[vid]:
                        row = {vn("X", vid, i, t, k): 1.0,
                               vn("Y", vid, i, t): -v.capacities[k]}
                        m.add_constr(f"cap_hold[{vid}|{i}|{t}|{k}]",
                                     self._coeffs(row), "<=", 0.0)
        # transport capacity
        for a in self.arcs:
            v = self.launchers.get(a.vehicle) or self.active[a.vehicle]
            for k in self.carriable[a.vehicle]:
                row = {vn("U", *a.key, k): 1.0, vn("W", *a.key): -v.capacities[k]}
                m.add_constr(f"cap_arc[{'|'.join(map(str, a.key))}|{k}]",
                             self._coeffs(row), "<=", 0.0)
            if v.payload_capacity is not None:
                row = {vn("U", *a.key, k): self.scenario.unit_mass(k)
                       for k in self.carriable[a.vehicle]}
                row[vn("W", *a.key)] = -v.payload_capacity
                m.add_constr(f"cap_payload[{'|'.join(map(str, a.key))}]",
                             self._coeffs(row), "<=", 0.0)

    def _add_transformation(self):
        m, scn = self.model, self.scenario
        # total wet mass definition and flight-feasibility bound
        for a in self.arcs:
            if a.is_launch:
                continue
            v = self.active[a.vehicle]
            row = {vn("Z", *a.key): 1.0, vn("W", *a.key): -v.dry_mass}
            for k in self.carriable[a.vehicle]:
                row[vn("U", *a.key, k)] = -scn.unit_mass(k)
            m.add_constr(f"wet_mass[{'|'.join(map(str, a.key))}]",
                         self._coeffs(row), "==", 0.0)
            if math.isfinite(a.mass_upper_bound):
                row = {vn("Z", *a.key): 1.0,
                       vn("W", *a.key): -a.mass_upper_bound}
                m.add_constr(f"mass_ub[{'|'.join(map(str, a.key))}]",
                             self._coeffs(row), "<=", 0.0)
            # propellant on board must cover the burn
            mode = self._mode_of(a)
            row = {vn("U", *a.key, mode.propellant_commodity): 1.0}
            self._add_expr(row, self.arc_consumption(a), -1.0)
            m.add_constr(f"prop_avail[{'|'.join(map(str, a.key))}]",
                         self._coeffs(row), ">=", 0.0)
            if a.r == "low_thrust":
                self._add_sos2(a)
        # depot station keeping stock must cover the holdover burn
        for vid, v in self.active.items():
            if v.station_keeping_rate <= 0:
                continue
            k = v.station_keeping_commodity
            for i in self.presence[vid]:
                for t in self.grid.steps:
                    dt = self.grid.delta_forward(t)
                    if dt <= 0 or vn("X", vid, i, t, k) not in m:
                        continue
                    row = {vn("X", vid, i, t, k): 1.0,
                           vn("Y", vid, i, t): -v.station_keeping_rate * dt}
                    m.add_constr(f"sk_avail[{vid}|{i}|{t}]",
                                 self._coeffs(row), ">=", 0.0)

    def _add_sos2(self, a: TransportArc):
        m = self.model
        pts = self.lt_points[a.key]
        n = len(pts)
        lam = [vn("L", *a.key, j) for j in range(n)]
        seg = [vn("G", *a.key, j) for j in range(n - 1)]
        m.add_constr(f"sos2_sum[{'|'.join(map(str, a.key))}]",
                     self._coeffs({v: 1.0 for v in lam}), "==", 1.0)
        row = {v: pts[j][0] for j, v in enumerate(lam) if pts[j][0] != 0.0}
        row[vn("Z", *a.key)] = -1.0
        m.add_constr(f"sos2_mass[{'|'.join(map(str, a.key))}]",
                     self._coeffs(row), "==", 0.0)
        m.add_constr(f"sos2_seg[{'|'.join(map(str, a.key))}]",
                     self._coeffs({v: 1.0 for v in seg}), "==", 1.0)
        for j, lv in enumerate(lam):
            row = {lv: 1.0}
            if j > 0:
                row[seg[j - 1]] = -1.0
            if j < n - 1:
                row[seg[j]] = row.get(seg[j], 0.0) - 1.0
            m.add_constr(f"sos2_adj[{'|'.join(map(str, a.key))}|{j}]",
                         self._coeffs(row), "<=", 0.0)

    def _add_service_management(self):
        m, grid = self.model, self.grid
        # each need assigned at most once
        for need in self.needs:
            row = {vn("H", vid, need.id, tau): 1.0
                   for vid in self.capable[need.id] for tau in need.window}
            if row:
                m.add_constr(f"assign_once[{need.id}]", self._coeffs(row),
                             "<=", 1.0)
        # a vehicle only starts a service it was dispatched for
        for need in self.needs:
            for vid in self.capable[need.id]:
                for t in grid.steps:
                    bname = vn("B", vid, need.id, t)
                    if bname not in m:
                        continue
                    row = {bname: 1.0}
                    for tau in need.window:
                        if self.beta[need.id].get((tau, t), 0):
                            row[vn("H", vid, need.id, tau)] = -1.0
                    m.add_constr(f"dispatch[{vid}|{need.id}|{t}]",
                                 self._coeffs(row), "==", 0.0)
        # one service at a time per customer node
        for i, needs_i in self.needs_at.items():
            for t in grid.steps:
                row = {}
                for need in needs_i:
                    for vid in self.capable[need.id]:
                        if vn("B", vid, need.id, t) in m:
                            row[vn("B", vid, need.id, t)] = 1.0
                if row:
                    m.add_constr(f"one_service[{i}|{t}]", self._coeffs(row),
                                 "<=", 1.0)
        # presence at customer nodes equals dispatch
        for vid, v in self.active.items():
            if not v.is_servicer:
                continue
            for node in self.nodes.customer:
                i = node.index
                for t in grid.steps:
                    row = {vn("Y", vid, i, t): 1.0}
                    for need in self.needs_at.get(i, ()):
                        if vid in self.capable[need.id] \
                                and vn("B", vid, need.id, t) in m:
                            row[vn("B", vid, need.id, t)] = -1.0
                    m.add_constr(f"presence[{vid}|{i}|{t}]", self._coeffs(row),
                                 "==", float(self._pinned(vid, i, t)))
        # the adequate tool must be on board
        for vid, v in self.active.items():
            if not v.is_servicer:
                continue
            for node in self.nodes.customer:
                i = node.index
                for t in grid.steps:
                    for k in self.scenario.tool_ids():
                        row = {}
                        for need in self.needs_at.get(i, ()):
                            if need.required_tool == k \
                                    and vid in self.capable[need.id] \
                                    and vn("B", vid, need.id, t) in m:
                                row[vn("B", vid, need.id, t)] = -1.0
                        if not row:
                            continue
                        if vn("X", vid, i, t, k) not in m:
                            raise ModelError(
                                f"servicer {vid} cannot carry tool {k}")
                        row[vn("X", vid, i, t, k)] = 1.0
                        m.add_constr(f"tool[{vid}|{i}|{t}|{k}]",
                                     self._coeffs(row), ">=", 0.0)

    def _add_flight_rules(self):
        # arrivals at a customer node exactly when a service starts
        # (with an allowance for a servicer that begins the
        # horizon already at a customer node)
        m, grid = self.model, self.grid
        for vid, v in self.active.items():
            if not v.is_servicer:
                continue
            for node in self.nodes.customer:
                i = node.index
                for t in grid.steps:
                    row: dict[str, float] = {}
                    for a in self.arr_arcs.get((vid, i, t), ()):
                        if not a.is_launch:
                            row[vn("W", *a.key)] = 1.0
                    for need in self.needs_at.get(i, ()):
                        if t in need.window and vid in self.capable[need.id]:
                            row[vn("H", vid, need.id, t)] = \
                                row.get(vn("H", vid, need.id, t), 0.0) - 1.0
                    if t == grid.steps[0] and vn("S0", vid) in m \
                            and self.node_by_name[self.init.vehicle_nodes[vid]].index == i:
                        row[vn("S0", vid)] = 1.0
                    if row:
                        m.add_constr(f"arrival[{vid}|{i}|{t}]",
                                     self._coeffs(row), "==", 0.0)

    def _add_objective(self):
        m, scn, grid = self.model, self.scenario, self.grid
        self.obj_terms: dict[str, dict[str, float]] = {
            "revenues": {}, "launch": {}, "pdm": {}, "delay": {},
            "depot_ops": {}, "servicer_ops": {}}

        for need in self.needs:
            for vid in self.capable[need.id]:
                for tau in need.window:
                    self.obj_terms["revenues"][vn("H", vid, need.id, tau)] = \
                        need.revenue
                    delay = tau - need.tau_step
                    if delay > 0 and need.delay_penalty_per_day > 0:
                        self.obj_terms["delay"][vn("H", vid, need.id, tau)] = \
                            need.delay_penalty_per_day * delay
        for a in self.arcs:
            if not a.is_launch:
                continue
            launch = self.obj_terms["launch"]
            pdm = self.obj_terms["pdm"]
            c_l = scn.economics.launch_cost_per_kg
            for k in self.carriable[a.vehicle]:
                u = vn("U", *a.key, k)
                launch[u] = launch.get(u, 0.0) + c_l * scn.unit_mass(k)
                pdm[u] = pdm.get(u, 0.0) + scn.commodities[k].purchase_cost
            v = self.launchers.get(a.vehicle) or self.active[a.vehicle]
            w = vn("W", *a.key)
            launch[w] = launch.get(w, 0.0) + c_l * v.dry_mass
            pdm[w] = pdm.get(w, 0.0) + v.manufacturing_cost
        for vid, v in self.active.items():
            bucket = "depot_ops" if v.vehicle_class == "depot" else "servicer_ops"
            rate = v.operating_cost_per_day
            if rate <= 0:
                continue
            for i in self.presence[vid]:
                for t in grid.steps:
                    dt = grid.delta_forward(t)
                    if dt > 0:
                        y = vn("Y", vid, i, t)
                        self.obj_terms[bucket][y] = \
                            self.obj_terms[bucket].get(y, 0.0) + rate * dt
            if v.is_servicer:
                for a in self.arcs:
                    if a.vehicle == vid and not a.is_launch:
                        w = vn("W", *a.key)
                        self.obj_terms[bucket][w] = \
                            self.obj_terms[bucket].get(w, 0.0) + rate * a.q

        for nm, coeff in self.obj_terms["revenues"].items():
            m.add_objective(m.index(nm), coeff)
        for bucket in ("launch", "pdm", "delay", "depot_ops", "servicer_ops"):
            for nm, coeff in self.obj_terms[bucket].items():
                m.add_objective(m.index(nm), -coeff)

    # -- solving and extraction --------------------------------------------

    def solve(self) -> Solution:
        opts = self.options
        if opts.backend == "highs":
            res = self.model.solve(gap=opts.gap, time_limit=opts.time_limit)
        else:
            res = self.model.solve_subprocess(opts.backend, gap=opts.gap)
        sol = Solution(status=res.status, objective=res.objective,
                       values=res.values, gap=res.gap)
        if sol.feasible:
            sol.components = self.cost_components(sol.values)
            _check_integrality(self.model, sol.values)
        return sol

    def cost_components(self, values: dict[str, float]) -> dict[str, float]:
        out = {}
        for bucket, terms in self.obj_terms.items():
            out[bucket] = sum(coeff * values.get(nm, 0.0)
                              for nm, coeff in terms.items())
        out["profit"] = out["revenues"] - sum(
            out[b] for b in ("launch", "pdm", "delay", "depot_ops",
                             "servicer_ops"))
        return out


def _check_integrality(model: Model, values: dict[str, float],
                       tol: float = INT_TOL):
    for nm, kind in zip(model.var_names, model.var_kind):
        if kind != CONTINUOUS:
            v = values.get(nm, 0.0)
            if abs(v - round(v)) > tol:
                raise ModelError(f"non-integral value {v} for {nm}")


# -- independent solution audit --------------------------------------------

@dataclass(frozen=True)
class Violation:
    family: str
    key: str
    residual: float

    def __repr__(self):
        return f"Violation({self.family}, {self.key}, {self.residual:.3e})"


def audit(problem: PlanProblem, values: dict[str, float],
          tol: float = 1e-6) -> list[Violation]:
    """Re-check every constraint family directly from the problem inputs.

    Works from the network, needs and initial state rather than the stored
    model rows, so a bug in row assembly cannot hide from it.
    """
    scn, grid, net = problem.scenario, problem.grid, problem.net
    out: list[Violation] = []

    def val(tag, *parts):
        return values.get(vn(tag, *parts), 0.0)

    def consumption(a: TransportArc) -> float:
        if a.is_launch:
            return 0.0
        if a.r == "high_thrust":
            return a.model.metadata["burn_fraction"] * val("Z", *a.key)
        pts = problem.lt_points[a.key]
        return sum(val("L", *a.key, n) * f for n, (_, f) in enumerate(pts))

    def inflow(a: TransportArc, k: str) -> float:
        u = val("U", *a.key, k)
        mode = problem._mode_of(a)
        if mode is not None and k == mode.propellant_commodity:
            u -= consumption(a)
        return u

    def flag(family, key, residual):
        if abs(residual) > tol:
            out.append(Violation(family, key, residual))

    def commodity_balance(vid, i, t, k):
        total = 0.0
        if vn("X", vid, i, t, k) in problem.model:
            total += val("X", vid, i, t, k)
            tp = t - grid.delta_backward(t)
            if tp != t:
                total -= val("X", vid, i, tp, k)
                v = problem.active[vid]
                if v.station_keeping_rate > 0 and k == v.station_keeping_commodity:
                    total += v.station_keeping_rate * grid.delta_forward(tp) \
                        * val("Y", vid, i, tp)
        for a in problem.dep_arcs.get((vid, i, t), ()):
            if k in problem.carriable[vid]:
                total += val("U", *a.key, k)
        for a in problem.arr_arcs.get((vid, i, t), ()):
            if k in problem.carriable[vid]:
                total -= inflow(a, k)
        return total - problem._init_stock(vid, i, k, t)

    # customer-node balances (per servicer) with demand RHS
    for node in net.nodes.customer:
        i = node.index
        for vid, v in problem.active.items():
            if not v.is_servicer:
                continue
            for t in grid.steps:
                for k in problem.carriable[vid]:
                    lhs = commodity_balance(vid, i, t, k)
                    rhs = 0.0
                    for need in problem.needs_at.get(i, ()):
                        if t in need.window and vid in problem.capable[need.id]:
                            rhs -= need.commodity_demand.get(k, 0.0) \
                                * val("H", vid, need.id, t)
                    flag("mass_balance_customer", f"{vid}|{i}|{t}|{k}",
                         lhs - rhs)

    # parking-node pooled balances
    vids_all = list(problem.active) + list(problem.launchers)
    for node in net.nodes.parking:
        i = node.index
        for t in grid.steps:
            for k in scn.commodities:
                lhs = sum(commodity_balance(vid, i, t, k) for vid in vids_all
                          if k in problem.carriable.get(vid, ()))
                flag("mass_balance_parking", f"{i}|{t}|{k}", lhs)

    # vehicle balances
    for vid, v in problem.active.items():
        for i in problem.presence[vid]:
            for t in grid.steps:
                total = val("Y", vid, i, t)
                tp = t - grid.delta_backward(t)
                if tp != t:
                    total -= val("Y", vid, i, tp)
                for a in problem.dep_arcs.get((vid, i, t), ()):
                    total += val("W", *a.key)
                for a in problem.arr_arcs.get((vid, i, t), ()):
                    if a.vehicle not in problem.launchers:
                        total -= val("W", *a.key)
                flag("vehicle_balance", f"{vid}|{i}|{t}",
                     total - problem._init_presence(vid, i, t))

    # capacities
    for vid, v in problem.active.items():
        for i in problem.presence[vid]:
            for t in grid.steps:
                for k in problem.carriable[vid]:
                    excess = val("X", vid, i, t, k) \
                        - v.capacities[k] * val("Y", vid, i, t)
                    if excess > tol:
                        flag("capacity_holdover", f"{vid}|{i}|{t}|{k}", excess)
    for a in problem.arcs:
        v = problem.launchers.get(a.vehicle) or problem.active[a.vehicle]
        for k in problem.carriable[a.vehicle]:
            excess = val("U", *a.key, k) - v.capacities[k] * val("W", *a.key)
            if excess > tol:
                flag("capacity_arc", "|".join(map(str, a.key)) + f"|{k}", excess)
            if inflow(a, k) < -tol:
                flag("negative_inflow", "|".join(map(str, a.key)) + f"|{k}",
                     inflow(a, k))
        if v.payload_capacity is not None:
            excess = sum(scn.unit_mass(k) * val("U", *a.key, k)
                         for k in problem.carriable[a.vehicle]) \
                - v.payload_capacity * val("W", *a.key)
            if excess > tol:
                flag("capacity_payload", "|".join(map(str, a.key)), excess)

    # wet mass, mass upper bound, SOS2 structure
    for a in problem.arcs:
        if a.is_launch:
            continue
        v = problem.active[a.vehicle]
        z = val("Z", *a.key)
        wet = v.dry_mass * val("W", *a.key) + sum(
            scn.unit_mass(k) * val("U", *a.key, k)
            for k in problem.carriable[a.vehicle])
        flag("wet_mass", "|".join(map(str, a.key)), z - wet)
        if math.isfinite(a.mass_upper_bound):
            excess = z - a.mass_upper_bound * val("W", *a.key)
            if excess > tol:
                flag("mass_upper_bound", "|".join(map(str, a.key)), excess)
        if a.r == "low_thrust":
            pts = problem.lt_points[a.key]
            lam = [val("L", *a.key, n) for n in range(len(pts))]
            flag("sos2_sum", "|".join(map(str, a.key)), sum(lam) - 1.0)
            flag("sos2_mass", "|".join(map(str, a.key)),
                 sum(l * b for l, (b, _) in zip(lam, pts)) - z)
            support = [n for n, l in enumerate(lam) if l > tol]
            if len(support) > 2 or (len(support) == 2
                                    and support[1] - support[0] != 1):
                flag("sos2_adjacency", "|".join(map(str, a.key)),
                     float(len(support)))

    # service management
    for need in problem.needs:
        total = sum(val("H", vid, need.id, tau)
                    for vid in problem.capable[need.id] for tau in need.window)
        if total > 1.0 + tol:
            flag("assign_once", need.id, total - 1.0)
        for vid in problem.capable[need.id]:
            for t in grid.steps:
                b = val("B", vid, need.id, t)
                expected = sum(problem.beta[need.id].get((tau, t), 0)
                               * val("H", vid, need.id, tau)
                               for tau in need.window)
                flag("dispatch_coupling", f"{vid}|{need.id}|{t}", b - expected)
    for i, needs_i in problem.needs_at.items():
        for t in grid.steps:
            total = sum(val("B", vid, need.id, t) for need in needs_i
                        for vid in problem.capable[need.id])
            if total > 1.0 + tol:
                flag("one_service_at_a_time", f"{i}|{t}", total - 1.0)
    for vid, v in problem.active.items():
        if not v.is_servicer:
            continue
        for node in net.nodes.customer:
            i = node.index
            for t in grid.steps:
                expected = sum(val("B", vid, need.id, t)
                               for need in problem.needs_at.get(i, ())
                               if vid in problem.capable[need.id])
                expected += problem._pinned(vid, i, t)
                flag("presence_dispatch", f"{vid}|{i}|{t}",
                     val("Y", vid, i, t) - expected)
                for k in scn.tool_ids():
                    required = sum(
                        val("B", vid, need.id, t)
                        for need in problem.needs_at.get(i, ())
                        if need.required_tool == k
                        and vid in problem.capable[need.id])
                    if required - val("X", vid, i, t, k) > tol:
                        flag("tool_on_board", f"{vid}|{i}|{t}|{k}",
                             required - val("X", vid, i, t, k))
                # arrivals exactly at service starts
                arrivals = sum(val("W", *a.key)
                               for a in problem.arr_arcs.get((vid, i, t), ())
                               if not a.is_launch)
                starts = sum(val("H", vid, need.id, t)
                             for need in problem.needs_at.get(i, ())
                             if t in need.window
                             and vid in problem.capable[need.id])
                if t == grid.steps[0] and vn("S0", vid) in problem.model \
                        and problem.node_by_name[
                            problem.init.vehicle_nodes[vid]].index == i:
                    starts -= val("S0", vid)
                flag("arrival_at_start", f"{vid}|{i}|{t}", arrivals - starts)

    return out


# -- schedule extraction ---------------------------------------------------

@dataclass(frozen=True)
class ScheduleEvent:
    day: int
    vehicle: str
    kind: str                   # flight | launch | service_start | service_end
    detail: dict

    def to_dict(self) -> dict:
        return {"day": self.day, "vehicle": self.vehicle, "kind": self.kind,
                "detail": self.detail}


@dataclass(frozen=True)
class Schedule:
    events: tuple[ScheduleEvent, ...]
    outcomes: dict[str, Optional[tuple[str, int]]]  # need id -> (vehicle, tau) | None

    def for_vehicle(self, vid: str) -> list[ScheduleEvent]:
        return [e for e in self.events if e.vehicle == vid]


def extract_schedule(problem: PlanProblem, solution: Solution,
                     tol: float = 1e-4) -> Schedule:
    if not solution.feasible:
        raise ModelError("cannot extract a schedule from an infeasible solve")
    values = solution.values
    _check_integrality(problem.model, values)
    names = {n.index: n.name for n in problem.net.nodes.nodes}
    events: list[ScheduleEvent] = []

    for a in problem.arcs:
        w = values.get(vn("W", *a.key), 0.0)
        if w < 0.5:
            continue
        cargo = {k: values.get(vn("U", *a.key, k), 0.0)
                 for k in problem.carriable[a.vehicle]}
        cargo = {k: v for k, v in cargo.items() if v > tol}
        if a.is_launch:
            if not cargo and a.vehicle in problem.launchers:
                continue        # a launch slot left unused
            events.append(ScheduleEvent(
                day=a.t, vehicle=a.vehicle, kind="launch",
                detail={"to": names[a.j], "arrive_day": a.arrival,
                        "cargo": cargo}))
        else:
            burned = 0.0
            if a.r == "high_thrust":
                burned = a.model.metadata["burn_fraction"] \
                    * values.get(vn("Z", *a.key), 0.0)
            else:
                pts = problem.lt_points[a.key]
                burned = sum(values.get(vn("L", *a.key, n), 0.0) * f
                             for n, (_, f) in enumerate(pts))
            events.append(ScheduleEvent(
                day=a.t, vehicle=a.vehicle, kind="flight",
                detail={"from": names[a.i], "to": names[a.j], "mode": a.r,
                        "q_days": a.q, "arrive_day": a.arrival,
                        "wet_mass_kg": values.get(vn("Z", *a.key), 0.0),
                        "propellant_kg": burned, "cargo": cargo}))

    outcomes: dict[str, Optional[tuple[str, int]]] = {}
    for need in problem.needs:
        outcomes[need.id] = None
        for vid in problem.capable[need.id]:
            for tau in need.window:
                if values.get(vn("H", vid, need.id, tau), 0.0) > 0.5:
                    outcomes[need.id] = (vid, tau)
                    events.append(ScheduleEvent(
                        day=tau, vehicle=vid, kind="service_start",
                        detail={"need": need.id, "satellite": need.satellite,
                                "service_type": need.service_type,
                                "revenue": need.revenue,
                                "delay_days": tau - need.tau_step,
                                "end_day": tau + need.duration}))
    events.sort(key=lambda e: (e.day, e.vehicle, e.kind))
    return Schedule(events=tuple(events), outcomes=outcomes)
