"""Sparse concave-maximization programs with named rows and dual recovery.

A :class:`ConvexProgram` collects variables, named linear rows, named
second-order-cone rows, and structured nonlinear objective terms (quadratic
penalties, entropy ``x ln x`` terms, and power terms ``x**p``). It compiles to
a single conic problem: entropy terms become exponential-cone epigraphs,
power terms become power-cone epigraphs, and quadratics go into the objective
matrix. The interior-point backend returns both primal and dual objective
values, so optimality is certified by an explicit duality gap, and every
named row carries a dual multiplier reported as d(optimal value)/d(rhs) of
the maximize problem.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

import clarabel


class ProgramError(RuntimeError):
    """Inconsistent program construction (programming error, fail fast)."""


@dataclass
class _Row:
    name: str
    cols: np.ndarray
    vals: np.ndarray
    rhs: float


@dataclass
class _Soc:
    name: str
    bound: float                # ||x[cols]|| <= bound
    cols: np.ndarray


@dataclass
class _Term:
    """One convex penalty subtracted from the maximized objective."""
    kind: str                   # 'quad' | 'entropy' | 'power'
    col: int
    weight: float               # >= 0 keeps the objective concave
    exponent: float = 2.0       # only for 'power'

    def value(self, x: float) -> float:
        if self.kind == "quad":
            return self.weight * x * x
        if self.kind == "entropy":
            return 0.0 if x <= 0.0 else self.weight * x * np.log(x)
        return self.weight * x ** self.exponent


class ConvexProgram:
    """Maximize a concave objective over named linear and conic rows."""

    def __init__(self):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self.eq_rows: list[_Row] = []
        self.le_rows: list[_Row] = []
        self.soc_rows: list[_Soc] = []
        self.obj_lin: dict[int, float] = {}
        self.terms: list[_Term] = []
        self._row_names: set[str] = set()

    # -- variables ----------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self._names)

    @property
    def var_names(self) -> list[str]:
        return list(self._names)

    def add_var(self, name: str, lb: float | None = None, ub: float | None = None) -> int:
        if name in self._index:
            raise ProgramError(f"duplicate variable {name!r}")
        j = len(self._names)
        self._names.append(name)
        self._index[name] = j
        if lb is not None:
            self.add_le(f"lb[{name}]", {j: -1.0}, -lb)
        if ub is not None:
            self.add_le(f"ub[{name}]", {j: 1.0}, ub)
        return j

    def var(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ProgramError(f"unknown variable {name!r}") from None

    def has_var(self, name: str) -> bool:
        return name in self._index

    # -- rows -----------------------------------------------------------------

    def _pack(self, name: str, coeffs: dict[int, float], rhs: float) -> _Row:
        if name in self._row_names:
            raise ProgramError(f"duplicate row {name!r}")
        self._row_names.add(name)
        nv = self.num_vars
        for j in coeffs:
            if not 0 <= j < nv:
                raise ProgramError(f"row {name!r} references unknown column {j}")
        cols = np.fromiter(coeffs.keys(), dtype=np.int64, count=len(coeffs))
        vals = np.fromiter(coeffs.values(), dtype=np.float64, count=len(coeffs))
        return _Row(name, cols, vals, float(rhs))

    def add_eq(self, name: str, coeffs: dict[int, float], rhs: float) -> None:
        """Row sum_j coeffs[j] * x_j == rhs."""
        self.eq_rows.append(self._pack(name, coeffs, rhs))

    def add_le(self, name: str, coeffs: dict[int, float], rhs: float) -> None:
        """Row sum_j coeffs[j] * x_j <= rhs."""
        self.le_rows.append(self._pack(name, coeffs, rhs))

    def add_soc(self, name: str, bound: float, cols: list[int]) -> None:
        """Cone row ||(x_j for j in cols)||_2 <= bound (a nonnegative constant)."""
        if name in self._row_names:
            raise ProgramError(f"duplicate row {name!r}")
        if bound < 0:
            raise ProgramError(f"cone {name!r} has negative bound")
        self._row_names.add(name)
        self.soc_rows.append(_Soc(name, float(bound), np.asarray(cols, dtype=np.int64)))

    # -- objective (maximize) -------------------------------------------------

    def add_linear(self, col: int, coeff: float) -> None:
        self.obj_lin[col] = self.obj_lin.get(col, 0.0) + float(coeff)

    def add_quadratic(self, col: int, weight: float) -> None:
        """Subtract weight * x**2 from the objective (weight >= 0)."""
        self.terms.append(_Term("quad", col, float(weight)))

    def add_entropy(self, col: int, weight: float) -> None:
        """Subtract weight * x ln x from the objective (weight >= 0, x >= 0)."""
        self.terms.append(_Term("entropy", col, float(weight)))

    def add_power(self, col: int, weight: float, exponent: float) -> None:
        """Subtract weight * x**exponent from the objective (x >= 0, exponent > 1)."""
        if exponent <= 1.0:
            raise ProgramError(f"power term exponent {exponent} must exceed 1")
        self.terms.append(_Term("power", col, float(weight), float(exponent)))

    def objective_value(self, x: np.ndarray) -> float:
        """Evaluate the maximized objective at a primal point."""
        val = sum(c * x[j] for j, c in self.obj_lin.items())
        return float(val) - sum(t.value(x[t.col]) for t in self.terms)

    # -- concavity guard --------------------------------------------------------

    def check_concave(self, seed: int = 0, slack: float = 1e-10) -> None:
        """Verify every registered penalty is convex by a midpoint test.

        Deterministic: a fixed-seed generator draws the sample points, so the
        guard never introduces run-to-run variation.
        """
        rng = np.random.default_rng(seed)
        for t in self.terms:
            if t.weight < 0:
                raise ProgramError(f"{t.kind} term on column {t.col} has negative weight")
            for _ in range(8):
                a, b = rng.uniform(0.0, 10.0, size=2)
                th = rng.uniform(0.0, 1.0)
                mid = t.value(th * a + (1 - th) * b)
                chord = th * t.value(a) + (1 - th) * t.value(b)
                if mid > chord + slack:
                    raise ProgramError(
                        f"{t.kind} term on column {t.col} failed midpoint convexity")

    # -- residuals ---------------------------------------------------------------

    def feasibility_residual(self, x: np.ndarray) -> float:
        """Max unscaled violation over every linear and cone row."""
        res = 0.0
        for row in self.eq_rows:
            res = max(res, abs(float(x[row.cols] @ row.vals) - row.rhs))
        for row in self.le_rows:
            res = max(res, float(x[row.cols] @ row.vals) - row.rhs)
        for soc in self.soc_rows:
            res = max(res, float(np.linalg.norm(x[soc.cols])) - soc.bound)
        return res


# ---------------------------------------------------------------------------
# solution bundle
# ---------------------------------------------------------------------------

@dataclass
class SolutionBundle:
    """Primal/dual solution with named duals and a certified gap."""

    status: str                          # optimal | infeasible | unbounded | iteration-limit
    x: np.ndarray                        # values of the declared variables
    var_index: dict[str, int]
    duals: dict[str, float]              # d(optimal value)/d(rhs), per named row
    objective_primal: float
    objective_dual: float
    iterations: int
    solve_time: float
    feasibility_residual: float
    infeasibility_hint: tuple[str, ...] = ()

    def value(self, name: str) -> float:
        return float(self.x[self.var_index[name]])

    def dual(self, name: str) -> float:
        try:
            return self.duals[name]
        except KeyError:
            raise KeyError(f"no dual recorded for row {name!r}") from None


def duality_gap(b: SolutionBundle) -> float:
    """Relative gap |primal - dual| / (1 + |primal|) of an optimal bundle."""
    if b.status != "optimal":
        raise ValueError(f"duality gap undefined for status {b.status!r}")
    return abs(b.objective_primal - b.objective_dual) / (1.0 + abs(b.objective_primal))


_STATUS_MAP = {
    "Solved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def solve(prog: ConvexProgram, tol: float = 1e-8, max_iter: int = 200) -> SolutionBundle:
    """Solve to primal-dual optimality at relative gap ``tol``.

    Deterministic: identical programs produce identical bundles. On
    infeasibility the rows most implicated by the solver's certificate are
    reported as a hint.
    """
    n = prog.num_vars
    ent_terms = [t for t in prog.terms if t.kind == "entropy" and t.weight > 0]
    pow_terms = [t for t in prog.terms if t.kind == "power" and t.weight > 0]
    n_total = n + len(ent_terms) + len(pow_terms)

    # minimize form: negate linear objective, charge the epigraph variables
    qv = np.zeros(n_total)
    for j, c in prog.obj_lin.items():
        qv[j] = -c
    p_diag = np.zeros(n_total)
    for t in prog.terms:
        if t.kind == "quad" and t.weight > 0:
            p_diag[t.col] += 2.0 * t.weight
    P = sparse.diags(p_diag, format="csc")

    rows_i: list[int] = []
    rows_j: list[int] = []
    rows_v: list[float] = []
    b: list[float] = []

    def emit(coeffs: list[tuple[int, float]], rhs: float) -> None:
        r = len(b)
        for j, v in coeffs:
            rows_i.append(r)
            rows_j.append(j)
            rows_v.append(v)
        b.append(rhs)

    cones: list = []
    # zero cone: equality rows
    for row in prog.eq_rows:
        emit(list(zip(row.cols.tolist(), row.vals.tolist())), row.rhs)
    if prog.eq_rows:
        cones.append(clarabel.ZeroConeT(len(prog.eq_rows)))
    # nonnegative cone: inequality rows (slack b - Ax >= 0)
    for row in prog.le_rows:
        emit(list(zip(row.cols.tolist(), row.vals.tolist())), row.rhs)
    if prog.le_rows:
        cones.append(clarabel.NonnegativeConeT(len(prog.le_rows)))
    # second-order cones: s = (bound, x_tail)
    for soc in prog.soc_rows:
        emit([], soc.bound)
        for j in soc.cols.tolist():
            emit([(j, -1.0)], 0.0)
        cones.append(clarabel.SecondOrderConeT(len(soc.cols) + 1))
    # exponential cones: (-w, x, 1) certifies w >= x ln x
    for k, t in enumerate(ent_terms):
        w = n + k
        qv[w] += t.weight
        emit([(w, 1.0)], 0.0)
        emit([(t.col, -1.0)], 0.0)
        emit([], 1.0)
        cones.append(clarabel.ExponentialConeT())
    # power cones: (g, 1, x) in Pow(1/p) certifies g >= x**p
    for k, t in enumerate(pow_terms):
        g = n + len(ent_terms) + k
        qv[g] += t.weight
        emit([(g, -1.0)], 0.0)
        emit([], 1.0)
        emit([(t.col, -1.0)], 0.0)
        cones.append(clarabel.PowerConeT(1.0 / t.exponent))

    A = sparse.coo_matrix(
        (rows_v, (rows_i, rows_j)), shape=(len(b), n_total)).tocsc()
    bv = np.asarray(b)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_rel = tol
    settings.tol_gap_abs = tol
    settings.tol_feas = min(1e-9, tol)
    if hasattr(settings, "max_threads"):
        settings.max_threads = 1

    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(P, qv, A, bv, cones, settings)
    raw = solver.solve()
    wall = time.perf_counter() - t0

    status = _STATUS_MAP.get(str(raw.status), "iteration-limit")
    x_full = np.asarray(raw.x)
    z = np.asarray(raw.z)
    x = x_full[:n]

    duals: dict[str, float] = {}
    pos = 0
    for row in prog.eq_rows:
        duals[row.name] = float(z[pos])
        pos += 1
    for row in prog.le_rows:
        duals[row.name] = float(z[pos])
        pos += 1

    hint: tuple[str, ...] = ()
    if status == "infeasible":
        # the certificate concentrates on the irreducible rows
        named = list(prog.eq_rows) + list(prog.le_rows)
        weights = np.abs(z[: len(named)])
        if weights.size and weights.max() > 0:
            order = np.argsort(-weights)[:5]
            hint = tuple(named[k].name for k in order if weights[k] > 1e-9 * weights.max())

    return SolutionBundle(
        status=status,
        x=x,
        var_index={nm: j for j, nm in enumerate(prog.var_names)},
        duals=duals,
        objective_primal=-float(raw.obj_val),
        objective_dual=-float(raw.obj_val_dual),
        iterations=int(raw.iterations),
        solve_time=wall,
        feasibility_residual=prog.feasibility_residual(x) if status == "optimal" else float("nan"),
        infeasibility_hint=hint,
    )
