"""Randomized closed micro instances shared by the oracle-equivalence tests.

One multimodal servicer, one parking slot, one or two customer satellites, a
short grid, preloaded tanks, no Earth node. Small enough that the brute-force
oracle enumerates every plan.
"""

from __future__ import annotations

import numpy as np

from oosplan.demand import ServiceNeed, build_window
from oosplan.milp import InitialState
from oosplan.network import build_nodes, build_time_grid, expand
from oosplan.scenario import CustomerSat, Scenario, scenario_from_dict


def micro_scenario(rng: np.random.Generator) -> Scenario:
    biprop_cap = float(rng.uniform(200.0, 1200.0))
    xenon_cap = float(rng.uniform(50.0, 400.0))
    cargo_cap = float(rng.uniform(100.0, 400.0))
    cfg = {
        "commodities": [
            {"id": "bipropellant", "kind": "continuous", "unit_mass": 1.0,
             "purchase_cost": 180.0},
            {"id": "xenon", "kind": "continuous", "unit_mass": 1.0,
             "purchase_cost": 1115.0},
            {"id": "monopropellant", "kind": "continuous", "unit_mass": 1.0,
             "purchase_cost": 230.0},
            {"id": "T1", "kind": "tool", "unit_mass": 100.0,
             "purchase_cost": 100000.0},
        ],
        "vehicles": [
            {"id": "servicer", "class": "servicer",
             "dry_mass": float(rng.uniform(2000.0, 4000.0)),
             "capacities": {"bipropellant": biprop_cap, "xenon": xenon_cap,
                            "monopropellant": cargo_cap, "T1": 1},
             "tools_installed": ["T1"],
             "operating_cost_per_day": float(rng.uniform(0.0, 20000.0)),
             "manufacturing_cost": 75e6,
             "propulsion": [
                 {"kind": "high_thrust", "isp": 316.0,
                  "propellant_commodity": "bipropellant",
                  "flight_durations": [2, 4]},
                 {"kind": "low_thrust", "isp": 1790.0, "thrust": 1.16,
                  "propellant_commodity": "xenon",
                  "flight_durations": [10, 14]},
             ]},
        ],
        "services": [],
        "network": {"period": 10, "offsets": [2, 4],
                    "parking_longitudes": [-170.0]},
    }
    return scenario_from_dict(cfg)


def micro_instance(seed: int, horizon: int = 30):
    """Build (scenario, sats, net, needs, init) for one random micro case."""
    rng = np.random.default_rng(seed)
    scenario = micro_scenario(rng)
    n_sats = int(rng.integers(1, 3))
    sats = [CustomerSat(f"sat{i}", float(rng.uniform(-180.0, 180.0)) or 1.0)
            for i in range(n_sats)]
    nodes = build_nodes(scenario, sats, include_earth=False)
    grid = build_time_grid(scenario.network.period, scenario.network.offsets,
                           horizon)
    net = expand(nodes, grid, scenario)

    needs = []
    n_needs = int(rng.integers(1, 3))
    for n in range(n_needs):
        sat = sats[int(rng.integers(0, n_sats))]
        demand = {"monopropellant": float(rng.uniform(0.0, 150.0))}
        need = ServiceNeed(
            id=f"{sat.name}/job/{n}", satellite=sat.name, service_type="job",
            tau=float(rng.uniform(0.0, horizon * 0.7)),
            duration=int(rng.choice([4, 10])),
            revenue=float(rng.uniform(5e6, 30e6)),
            delay_penalty_per_day=float(rng.choice([0.0, 1e5, 2e5])),
            commodity_demand=demand, required_tool="T1")
        built = build_window(need, grid, float(rng.uniform(8.0, 30.0)))
        if built is not None:
            needs.append(built)
    needs.sort(key=lambda n: n.tau)

    design = scenario.vehicles["servicer"]
    loads = {k: cap * float(rng.uniform(0.5, 1.0)) if k != "T1" else 1
             for k, cap in design.capacities.items()}
    init = InitialState(vehicle_nodes={"servicer": "parking_0"},
                        commodities={"servicer": loads})
    return scenario, sats, net, needs, init
