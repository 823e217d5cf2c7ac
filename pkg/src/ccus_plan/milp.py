"""Solver-agnostic MILP representation, LP-format export and the solve contract.

Variables are addressed by integer handles (their registration order).  A model
is compiled lazily into sparse arrays; the compiled form is cached until the
model is mutated, so repeated solves with different bound overrides (as done by
the enumeration oracle) do not rebuild matrices.
"""
from __future__ import annotations

import math
import os
import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

CONTINUOUS, BINARY, INTEGER = "continuous", "binary", "integer"
LE, EQ, GE = "<=", "=", ">="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
GAP_LIMIT = "gap-limit"
TIME_LIMIT = "time-limit"
ERROR = "error"

FEAS_TOL = 1e-6
INT_TOL = 1e-6

Terms = Iterable[tuple[float, int]]


class ModelError(ValueError):
    pass


class AdapterUnavailable(RuntimeError):
    pass


class SolverFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Variable:
    handle: int
    name: str
    kind: str
    lower: float
    upper: float

    @property
    def is_integral(self) -> bool:
        return self.kind != CONTINUOUS


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    terms: tuple[tuple[float, int], ...]
    sense: str
    rhs: float


def _merge_terms(terms: Terms, n_vars: int, what: str) -> tuple[tuple[float, int], ...]:
    merged: dict[int, float] = {}
    for coef, h in terms:
        if not isinstance(h, (int, np.integer)) or not 0 <= h < n_vars:
            raise ModelError(f"{what}: unknown variable handle {h!r}")
        coef = float(coef)
        if not math.isfinite(coef):
            raise ModelError(f"{what}: non-finite coefficient {coef!r} on handle {h}")
        merged[int(h)] = merged.get(int(h), 0.0) + coef
    return tuple((c, h) for h, c in sorted(merged.items()) if c != 0.0)


@dataclass
class Compiled:
    c: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    constant: float


class MilpModel:
    """Minimisation MILP: variables, linear constraints, linear objective plus constant."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[LinearConstraint] = []
        self.objective: tuple[tuple[float, int], ...] = ()
        self.objective_constant = 0.0
        self._names: dict[str, int] = {}
        self._cnames: set[str] = set()
        self._compiled: Compiled | None = None

    def __repr__(self) -> str:
        return f"MilpModel({self.name!r}, vars={len(self.variables)}, cons={len(self.constraints)})"

    # -- building -------------------------------------------------------------

    def add_variable(self, name: str, kind: str = CONTINUOUS, lower: float = 0.0, upper: float = math.inf) -> int:
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        if kind not in (CONTINUOUS, BINARY, INTEGER):
            raise ModelError(f"unknown variable kind {kind!r}")
        lower, upper = float(lower), float(upper)
        if kind == BINARY and upper == math.inf:
            upper = 1.0
        if math.isnan(lower) or math.isnan(upper) or lower > upper:
            raise ModelError(f"variable {name!r}: inverted bounds [{lower}, {upper}]")
        if kind == BINARY and (lower < 0 or upper > 1):
            raise ModelError(f"binary variable {name!r} must have bounds within [0, 1]")
        h = len(self.variables)
        self.variables.append(Variable(h, name, kind, lower, upper))
        self._names[name] = h
        self._compiled = None
        return h

    def add_constraint(self, name: str, terms: Terms, sense: str, rhs: float) -> int:
        if sense not in (LE, EQ, GE):
            raise ModelError(f"constraint {name!r}: unknown sense {sense!r}")
        if name in self._cnames:
            raise ModelError(f"duplicate constraint name {name!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ModelError(f"constraint {name!r}: non-finite rhs")
        merged = _merge_terms(terms, len(self.variables), f"constraint {name!r}")
        self.constraints.append(LinearConstraint(name, merged, sense, rhs))
        self._cnames.add(name)
        self._compiled = None
        return len(self.constraints) - 1

    def set_objective(self, terms: Terms, constant: float = 0.0) -> None:
        self.objective = _merge_terms(terms, len(self.variables), "objective")
        self.objective_constant = float(constant)
        self._compiled = None

    def set_bounds(self, handle: int, lower: float, upper: float) -> None:
        v = self.variables[handle]
        if lower > upper:
            raise ModelError(f"variable {v.name!r}: inverted bounds [{lower}, {upper}]")
        self.variables[handle] = Variable(v.handle, v.name, v.kind, float(lower), float(upper))
        self._compiled = None

    def handle(self, name: str) -> int:
        return self._names[name]

    @property
    def integer_handles(self) -> list[int]:
        return [v.handle for v in self.variables if v.is_integral]

    # -- evaluation -----------------------------------------------------------

    def compile(self) -> Compiled:
        if self._compiled is not None:
            return self._compiled
        n = len(self.variables)
        rows, cols, vals = [], [], []
        lo = np.empty(len(self.constraints))
        hi = np.empty(len(self.constraints))
        for i, con in enumerate(self.constraints):
            for coef, h in con.terms:
                rows.append(i)
                cols.append(h)
                vals.append(coef)
            lo[i] = con.rhs if con.sense in (EQ, GE) else -np.inf
            hi[i] = con.rhs if con.sense in (EQ, LE) else np.inf
        A = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
        c = np.zeros(n)
        for coef, h in self.objective:
            c[h] = coef
        self._compiled = Compiled(
            c=c,
            A=A,
            row_lo=lo,
            row_hi=hi,
            lb=np.array([v.lower for v in self.variables]),
            ub=np.array([v.upper for v in self.variables]),
            integrality=np.array([1 if v.is_integral else 0 for v in self.variables], dtype=np.int8),
            constant=self.objective_constant,
        )
        return self._compiled

    def objective_value(self, values: np.ndarray) -> float:
        return float(self.compile().c @ values + self.objective_constant)

    def max_violation(self, values: np.ndarray) -> float:
        """Largest absolute violation over rows, bounds and integrality."""
        m = self.compile()
        worst = 0.0
        if m.A.shape[0]:
            act = m.A @ values
            worst = max(worst, float(np.max(np.maximum(m.row_lo - act, 0.0))), float(np.max(np.maximum(act - m.row_hi, 0.0))))
        if len(values):
            worst = max(worst, float(np.max(np.maximum(m.lb - values, 0.0))), float(np.max(np.maximum(values - m.ub, 0.0))))
            ints = m.integrality.astype(bool)
            if ints.any():
                worst = max(worst, float(np.max(np.abs(values[ints] - np.round(values[ints])))))
        return worst


# ---------------------------------------------------------------- results and options


@dataclass(frozen=True)
class SolveResult:
    status: str
    objective_value: float | None = None
    values: np.ndarray | None = None
    gap: float | None = None
    wall_time: float = 0.0
    message: str = ""

    @property
    def has_values(self) -> bool:
        return self.values is not None

    def value(self, handle: int) -> float:
        if self.values is None:
            raise ValueError(f"no values available (status {self.status})")
        return float(self.values[handle])


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-6
    time_limit: float | None = None
    seed: int = 0
    backend: str | None = None  # None -> $CCUS_SOLVER_BACKEND or "highs"
    path: str | None = None
    polish: bool = True

    def resolved_backend(self) -> str:
        return self.backend or os.environ.get("CCUS_SOLVER_BACKEND") or "highs"


SWEEP_OPTIONS = SolverOptions(gap_tol=1e-4)


def _highs_solve(m: Compiled, lb: np.ndarray, ub: np.ndarray, integrality: np.ndarray, opts: SolverOptions):
    from scipy.optimize import Bounds, LinearConstraint as SciConstraint, milp

    constraints = [SciConstraint(m.A, m.row_lo, m.row_hi)] if m.A.shape[0] else []
    solver_opts = {"disp": False, "mip_rel_gap": opts.gap_tol, "presolve": True}
    if opts.time_limit is not None:
        solver_opts["time_limit"] = opts.time_limit
    res = milp(m.c, integrality=integrality, bounds=Bounds(lb, ub), constraints=constraints, options=solver_opts)
    status = {0: OPTIMAL, 1: TIME_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ERROR)
    gap = getattr(res, "mip_gap", None)
    if status == ERROR:
        raise SolverFailure(f"HiGHS: {res.message}")
    x = None if res.x is None else np.asarray(res.x, dtype=float)
    return status, x, (0.0 if gap is None and status == OPTIMAL else gap), res.message


def _glpk_bound_type(glp, lo: float, hi: float) -> tuple[int, float, float]:
    if lo == hi:
        return glp.GLP_FX, lo, hi
    if np.isfinite(lo) and np.isfinite(hi):
        return glp.GLP_DB, lo, hi
    if np.isfinite(lo):
        return glp.GLP_LO, lo, 0.0
    if np.isfinite(hi):
        return glp.GLP_UP, 0.0, hi
    return glp.GLP_FR, 0.0, 0.0


def _glpk_solve(m: Compiled, lb: np.ndarray, ub: np.ndarray, integrality: np.ndarray, opts: SolverOptions):
    # Raw GLPK API: the presolver stays off because GLPK 5 can abort the process
    # when presolve eliminates every column, and an abort cannot be caught.
    import swiglpk as glp

    n, rows = len(m.c), m.A.shape[0]
    # a dummy free row/column keeps GLPK away from zero-size allocation, which is fatal
    lp = glp.glp_create_prob()
    try:
        glp.glp_term_out(glp.GLP_OFF)
        glp.glp_set_obj_dir(lp, glp.GLP_MIN)
        glp.glp_add_cols(lp, n + 1)
        glp.glp_set_col_bnds(lp, n + 1, glp.GLP_FX, 0.0, 0.0)
        for j in range(n):
            glp.glp_set_col_bnds(lp, j + 1, *_glpk_bound_type(glp, lb[j], ub[j]))
            glp.glp_set_obj_coef(lp, j + 1, float(m.c[j]))
            if integrality[j]:
                glp.glp_set_col_kind(lp, j + 1, glp.GLP_IV)
        glp.glp_add_rows(lp, rows + 1)
        glp.glp_set_row_bnds(lp, rows + 1, glp.GLP_FR, 0.0, 0.0)
        A = m.A.tocsr()
        for i in range(rows):
            glp.glp_set_row_bnds(lp, i + 1, *_glpk_bound_type(glp, m.row_lo[i], m.row_hi[i]))
            idx, val = A.indices[A.indptr[i]:A.indptr[i + 1]], A.data[A.indptr[i]:A.indptr[i + 1]]
            ind, coef = glp.intArray(len(idx) + 1), glp.doubleArray(len(idx) + 1)
            for k, (j, v) in enumerate(zip(idx, val), start=1):
                ind[k], coef[k] = int(j) + 1, float(v)
            glp.glp_set_mat_row(lp, i + 1, len(idx), ind, coef)

        smcp = glp.glp_smcp()
        glp.glp_init_smcp(smcp)
        smcp.msg_lev = glp.GLP_MSG_OFF
        if opts.time_limit is not None:
            smcp.tm_lim = int(opts.time_limit * 1000)
        ret = glp.glp_simplex(lp, smcp)
        if ret == glp.GLP_ETMLIM:
            return TIME_LIMIT, None, None, "GLPK simplex time limit"
        if ret != 0:
            raise SolverFailure(f"GLPK simplex returned code {ret}")
        lp_status = glp.glp_get_status(lp)
        if lp_status in (glp.GLP_NOFEAS, glp.GLP_INFEAS):
            return INFEASIBLE, None, None, "LP relaxation infeasible"
        if lp_status == glp.GLP_UNBND:
            return UNBOUNDED, None, None, "LP relaxation unbounded"
        if lp_status != glp.GLP_OPT:
            raise SolverFailure(f"GLPK simplex status {lp_status}")
        if not integrality.any():
            x = np.array([glp.glp_get_col_prim(lp, j + 1) for j in range(n)])
            return OPTIMAL, x, 0.0, "optimal"

        iocp = glp.glp_iocp()
        glp.glp_init_iocp(iocp)
        iocp.msg_lev = glp.GLP_MSG_OFF
        iocp.presolve = glp.GLP_OFF
        iocp.mip_gap = opts.gap_tol
        if opts.time_limit is not None:
            iocp.tm_lim = int(opts.time_limit * 1000)
        ret = glp.glp_intopt(lp, iocp)
        mip_status = glp.glp_mip_status(lp)
        has_x = mip_status in (glp.GLP_OPT, glp.GLP_FEAS)
        x = np.array([glp.glp_mip_col_val(lp, j + 1) for j in range(n)]) if has_x else None
        if ret == 0 and mip_status == glp.GLP_OPT:
            return OPTIMAL, x, 0.0, "optimal"
        if mip_status == glp.GLP_NOFEAS:
            return INFEASIBLE, None, None, "integer infeasible"
        if ret in (glp.GLP_ETMLIM, glp.GLP_EMIPGAP):
            status = TIME_LIMIT if ret == glp.GLP_ETMLIM else GAP_LIMIT
            return status, x, None, f"GLPK stopped early (code {ret})"
        raise SolverFailure(f"GLPK intopt returned code {ret}, status {mip_status}")
    finally:
        glp.glp_delete_prob(lp)


ADAPTERS = {"highs": _highs_solve, "glpk": _glpk_solve}


def solve(
    model: MilpModel,
    options: SolverOptions | None = None,
    fixed: Mapping[int, float] | None = None,
    relax: bool = False,
) -> SolveResult:
    """Solve ``model`` with the configured adapter.

    ``fixed`` pins variables by collapsing their bounds; ``relax`` drops integrality.
    With ``options.polish`` a MILP incumbent is rounded and its continuous part
    re-optimised with the integers fixed, so returned values are exactly integral.
    """
    opts = options or SolverOptions()
    name = opts.resolved_backend()
    adapter = ADAPTERS.get(name)
    if adapter is None:
        raise AdapterUnavailable(f"no solver adapter named {name!r}; available: {sorted(ADAPTERS)}")
    m = model.compile()
    lb, ub = m.lb.copy(), m.ub.copy()
    if fixed:
        for h, val in fixed.items():
            lb[h] = ub[h] = float(val)
    integrality = np.zeros_like(m.integrality) if relax else m.integrality
    start = time.perf_counter()
    status, x, gap, message = adapter(m, lb, ub, integrality, opts)
    if x is not None and opts.polish and integrality.any():
        ints = integrality.astype(bool)
        rounded = np.round(x[ints])
        plb, pub = lb.copy(), ub.copy()
        plb[ints] = pub[ints] = rounded
        p_status, px, _, _ = adapter(m, plb, pub, np.zeros_like(integrality), opts)
        if p_status == OPTIMAL and px is not None:
            px[ints] = rounded
            x = px
    wall = time.perf_counter() - start
    if x is None:
        return SolveResult(status=status, gap=gap, wall_time=wall, message=str(message))
    if status == OPTIMAL and not integrality.any():
        gap = 0.0
    return SolveResult(
        status=status,
        objective_value=float(m.c @ x + m.constant),
        values=x,
        gap=gap,
        wall_time=wall,
        message=str(message),
    )


# ---------------------------------------------------------------- LP-format export

_LP_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _lp_names(names: Sequence[str], prefix: str) -> list[str]:
    out, seen = [], set()
    for i, name in enumerate(names):
        s = _LP_BAD.sub("_", name).strip("_") or f"{prefix}{i}"
        if s[0].isdigit() or s[0] in ".eE":
            s = f"{prefix}_{s}"
        base, k = s, i
        while s in seen:
            s = f"{base}__{k}"
            k += 1
        seen.add(s)
        out.append(s)
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def _expr(terms: Sequence[tuple[float, int]], names: Sequence[str]) -> str:
    if not terms:
        return "0 " + names[0] if names else "0"
    parts = []
    for k, (c, h) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = _fmt(abs(c))
        if k == 0:
            parts.append(f"{'-' if c < 0 else ''}{mag} {names[h]}")
        else:
            parts.append(f"{sign} {mag} {names[h]}")
    lines, line = [], ""
    for p in parts:
        if len(line) + len(p) > 200:
            lines.append(line)
            line = "   "
        line += (" " if line.strip() else "") + p
    lines.append(line)
    return "\n".join(lines)


def export_lp(model: MilpModel) -> str:
    """Deterministic CPLEX-LP text for ``model`` (names sanitised to the LP character set)."""
    vnames = _lp_names([v.name for v in model.variables], "x")
    cnames = _lp_names([c.name for c in model.constraints], "c")
    out = [f"\\ {model.name}", "Minimize"]
    obj = _expr(model.objective, vnames)
    if model.objective_constant:
        obj += f" + {_fmt(model.objective_constant)}" if model.objective_constant > 0 else f" - {_fmt(-model.objective_constant)}"
    out.append(f" obj: {obj}")
    out.append("Subject To")
    for cname, con in zip(cnames, model.constraints):
        out.append(f" {cname}: {_expr(con.terms, vnames)} {con.sense} {_fmt(con.rhs)}")
    out.append("Bounds")
    for v, n in zip(model.variables, vnames):
        if v.kind == BINARY and v.lower == 0 and v.upper == 1:
            continue
        if v.lower == -math.inf and v.upper == math.inf:
            out.append(f" {n} free")
        elif v.lower == v.upper:
            out.append(f" {n} = {_fmt(v.lower)}")
        else:
            lo = "-inf" if v.lower == -math.inf else _fmt(v.lower)
            hi = "+inf" if v.upper == math.inf else _fmt(v.upper)
            out.append(f" {lo} <= {n} <= {hi}")
    gens = [n for v, n in zip(model.variables, vnames) if v.kind == INTEGER]
    bins = [n for v, n in zip(model.variables, vnames) if v.kind == BINARY]
    if gens:
        out.append("Generals")
        out.extend(f" {n}" for n in gens)
    if bins:
        out.append("Binaries")
        out.extend(f" {n}" for n in bins)
    out.append("End")
    return "\n".join(out) + "\n"
