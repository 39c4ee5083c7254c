"""Generic mixed-integer linear model container with pluggable solving.

Holds named variables, linear constraints and a maximize objective; solves
in-process through scipy's HiGHS interface, or through any external solver via
LP-file export and a plain ``variable value`` solution file.
"""

from __future__ import annotations

import math
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

CONTINUOUS = "cont"
INTEGER = "int"
BINARY = "bin"

_STATUS = {0: "optimal", 1: "gap-stopped", 2: "infeasible", 3: "unbounded"}


class SolveError(Exception):
    pass


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]
    sense: str                  # "<=", ">=", "=="
    rhs: float


@dataclass
class SolveResult:
    status: str                 # optimal | gap-stopped | infeasible | unbounded
    objective: Optional[float]
    values: dict[str, float]
    gap: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.status in ("optimal", "gap-stopped")


class Model:
    """A MILP in maximize form."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.var_names: list[str] = []
        self.var_lb: list[float] = []
        self.var_ub: list[float] = []
        self.var_kind: list[str] = []
        self._index: dict[str, int] = {}
        self.objective: dict[int, float] = {}
        self.constraints: list[Constraint] = []

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf,
                kind: str = CONTINUOUS) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        idx = len(self.var_names)
        self.var_names.append(name)
        self.var_lb.append(lb)
        self.var_ub.append(ub)
        self.var_kind.append(kind)
        self._index[name] = idx
        return idx

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        return self._index[name]

    def fix(self, idx: int, value: float):
        self.var_lb[idx] = value
        self.var_ub[idx] = value

    def add_objective(self, idx: int, coeff: float):
        self.objective[idx] = self.objective.get(idx, 0.0) + coeff

    def add_constr(self, name: str, coeffs: dict[int, float], sense: str,
                   rhs: float):
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {sense!r}")
        self.constraints.append(Constraint(name, dict(coeffs), sense, rhs))

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    def solve(self, gap: float = 0.0, time_limit: Optional[float] = None) -> SolveResult:
        """Solve with HiGHS (scipy.optimize.milp)."""
        n = self.n_vars
        c = np.zeros(n)
        for idx, coeff in self.objective.items():
            c[idx] = -coeff     # scipy minimizes
        integrality = np.array(
            [0 if k == CONTINUOUS else 1 for k in self.var_kind])
        bounds = Bounds(np.array(self.var_lb), np.array(self.var_ub))
        constraints = []
        if self.constraints:
            rows, cols, data, lo, hi = [], [], [], [], []
            for ri, con in enumerate(self.constraints):
                for idx, coeff in con.coeffs.items():
                    if coeff != 0.0:
                        rows.append(ri)
                        cols.append(idx)
                        data.append(coeff)
                if con.sense == "<=":
                    lo.append(-np.inf); hi.append(con.rhs)
                elif con.sense == ">=":
                    lo.append(con.rhs); hi.append(np.inf)
                else:
                    lo.append(con.rhs); hi.append(con.rhs)
            a = sparse.csr_matrix((data, (rows, cols)),
                                  shape=(len(self.constraints), n))
            constraints = [LinearConstraint(a, lo, hi)]
        options = {"mip_rel_gap": gap}
        if time_limit is not None:
            options["time_limit"] = time_limit
        res = milp(c=c, constraints=constraints, integrality=integrality,
                   bounds=bounds, options=options)
        status = _STATUS.get(res.status, "error")
        if status == "error":
            raise SolveError(f"solver failure: {res.message}")
        if res.x is None:
            return SolveResult(status=status, objective=None, values={})
        values = {nm: float(v) for nm, v in zip(self.var_names, res.x)}
        achieved_gap = getattr(res, "mip_gap", None)
        return SolveResult(status=status, objective=float(-res.fun),
                           values=values, gap=achieved_gap)

    # -- LP text format ----------------------------------------------------

    def write_lp(self, path: str | Path):
        """Write the model in CPLEX LP format."""
        lines = ["\\ " + self.name, "Maximize", " obj: " + _expr(
            self.objective, self.var_names)]
        lines.append("Subject To")
        for i, con in enumerate(self.constraints):
            sense = {"<=": "<=", ">=": ">=", "==": "="}[con.sense]
            nm = re.sub(r"[^A-Za-z0-9_]", "_", con.name) or f"c{i}"
            lines.append(f" c{i}_{nm}: " + _expr(con.coeffs, self.var_names)
                         + f" {sense} {con.rhs:.17g}")
        lines.append("Bounds")
        for idx, nm in enumerate(self.var_names):
            lb, ub = self.var_lb[idx], self.var_ub[idx]
            sane = _sanitize(nm)
            if math.isinf(ub):
                lines.append(f" {lb:.17g} <= {sane}")
            else:
                lines.append(f" {lb:.17g} <= {sane} <= {ub:.17g}")
        generals = [i for i, k in enumerate(self.var_kind) if k != CONTINUOUS]
        if generals:
            lines.append("Generals")
            for idx in generals:
                lines.append(" " + _sanitize(self.var_names[idx]))
        lines.append("End")
        Path(path).write_text("\n".join(lines) + "\n")

    def solve_subprocess(self, command: str,
                         gap: float = 0.0) -> SolveResult:
        """Solve via an external command.

        The command receives ``{lp}`` and ``{sol}`` placeholders; the solution
        file must contain ``variable_name value`` lines.
        """
        with tempfile.TemporaryDirectory() as tmp:
            lp = Path(tmp) / "model.lp"
            sol = Path(tmp) / "model.sol"
            self.write_lp(lp)
            cmd = command.format(lp=lp, sol=sol)
            proc = subprocess.run(shlex.split(cmd), capture_output=True,
                                  text=True)
            if proc.returncode != 0:
                raise SolveError(
                    f"backend command failed ({proc.returncode}): "
                    f"{proc.stderr.strip()[:500]}")
            if not sol.exists():
                raise SolveError("backend produced no solution file")
            values = read_solution(sol, default_names=self.var_names)
        obj = sum(coeff * values.get(self.var_names[idx], 0.0)
                  for idx, coeff in self.objective.items())
        return SolveResult(status="optimal", objective=obj, values=values)


def read_solution(path: str | Path,
                  default_names: Optional[list[str]] = None) -> dict[str, float]:
    """Parse a ``variable_name value`` text solution file."""
    values: dict[str, float] = {}
    if default_names:
        values.update({nm: 0.0 for nm in default_names})
    rev = {_sanitize(nm): nm for nm in (default_names or [])}
    for line in Path(path).read_text().splitlines():
        parts = line.split()
        if len(parts) != 2:
            continue
        nm, val = parts
        try:
            v = float(val)
        except ValueError:
            continue
        values[rev.get(nm, nm)] = v
    return values


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.]", "_", name)


def _expr(coeffs: dict[int, float], names: list[str]) -> str:
    terms = []
    for idx in sorted(coeffs):
        coeff = coeffs[idx]
        if coeff == 0.0:
            continue
        sign = "+" if coeff >= 0 else "-"
        terms.append(f"{sign} {abs(coeff):.17g} {_sanitize(names[idx])}")
    if not terms:
        return "0 " + _sanitize(names[0]) if names else "0"
    out = " ".join(terms)
    return out[2:] if out.startswith("+ ") else out


def parse_lp(path: str | Path) -> Model:
    """Read back a model written by :meth:`Model.write_lp`.

    Supports the subset of the LP format the writer emits; used for
    cross-checking exported models.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith("\\")]
    model = Model(name="parsed")
    section = None
    pending: dict[str, float] = {}
    bounds: list[tuple[str, float, Optional[float]]] = []
    generals: set[str] = set()
    constrs: list[tuple[str, dict[str, float], str, float]] = []
    objective: dict[str, float] = {}

    token_re = re.compile(
        r"(?P<num>[0-9]+(?:\.[0-9]*)?(?:[eE][-+]?[0-9]+)?"
        r"|\.[0-9]+(?:[eE][-+]?[0-9]+)?)"
        r"|(?P<var>[A-Za-z_][A-Za-z0-9_.]*)"
        r"|(?P<op>[-+])")

    def parse_linexpr(expr: str) -> dict[str, float]:
        out: dict[str, float] = {}
        sign, coeff = 1.0, None
        for m in token_re.finditer(expr):
            if m.lastgroup == "op":
                sign = 1.0 if m.group() == "+" else -1.0
                coeff = None
            elif m.lastgroup == "num":
                coeff = float(m.group())
            else:
                val = coeff if coeff is not None else 1.0
                out[m.group()] = out.get(m.group(), 0.0) + sign * val
                sign, coeff = 1.0, None
        return out

    for ln in lines:
        stripped = ln.strip()
        low = stripped.lower()
        if low in ("maximize", "minimize", "subject to", "bounds",
                   "generals", "binaries", "end"):
            section = low
            continue
        if section == "maximize":
            body = stripped.split(":", 1)[-1]
            objective.update(parse_linexpr(body))
        elif section == "subject to":
            nm, body = stripped.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*([-+0-9.eE]+)\s*$", body)
            if not m:
                raise SolveError(f"cannot parse constraint: {stripped}")
            sense = {"<=": "<=", ">=": ">=", "=": "=="}[m.group(2)]
            constrs.append((nm.strip(), parse_linexpr(m.group(1)), sense,
                            float(m.group(3))))
        elif section == "bounds":
            m = re.match(r"([-+0-9.eE]+)\s*<=\s*(\S+)(?:\s*<=\s*([-+0-9.eE]+))?",
                         stripped)
            if not m:
                raise SolveError(f"cannot parse bound: {stripped}")
            bounds.append((m.group(2), float(m.group(1)),
                           float(m.group(3)) if m.group(3) else None))
        elif section == "generals":
            generals.add(stripped)

    for nm, lb, ub in bounds:
        model.add_var(nm, lb=lb, ub=math.inf if ub is None else ub,
                      kind=INTEGER if nm in generals else CONTINUOUS)
    for nm, coeff in objective.items():
        if nm not in model:
            model.add_var(nm)
        model.add_objective(model.index(nm), coeff)
    for cname, coeffs, sense, rhs in constrs:
        idx_coeffs = {}
        for nm, coeff in coeffs.items():
            if nm not in model:
                model.add_var(nm)
            idx_coeffs[model.index(nm)] = coeff
        model.add_constr(cname, idx_coeffs, sense, rhs)
    return model
