"""On-orbit servicing logistics planner.

Plans servicing campaigns for satellites on a shared circular orbit: a
time-expanded multi-commodity network couples vehicle routing, propellant and
spares logistics and service scheduling into one mixed-integer program, solved
either for a single horizon or on a rolling horizon with an economic ledger.
"""

__version__ = "0.1.0"

from .scenario import Scenario, load_catalog, load_scenario  # noqa: F401
from .trajectory import PluginRegistry, TrajectoryModel, TrajectoryQuery  # noqa: F401
