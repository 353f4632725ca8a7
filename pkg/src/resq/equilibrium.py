"""Equilibrium recovery and certification.

The combined solve yields one primal/dual pair; this module turns it into
market quantities and then certifies that the result is a genuine
multi-agent equilibrium: locational prices come off the power-clearing
duals, per-vehicle incentives off the vehicle-clearing duals, and travel
times off the conservation duals (rescaled back to hours). Certification
re-solves each stakeholder's own program at those fixed prices and compares
objective values — argmins may be non-unique (flat generation cost at the
marginal price, say), so value equality is the correct certificate. Driver
behavior is additionally checked in closed form: destination flows must
match logit shares, and used links must satisfy the reduced-cost (Wardrop)
conditions.

A damped Gauss-Seidel best-response iteration over the same agent programs
serves as an independent oracle on tiny instances: when it converges, its
fixed point must match the combined solve.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import assemble as asm
from .fleet import dwell_hours, vn_deg, vn_pcs, vn_pev, vn_qp, window_hours
from .model import Scenario
from .power import dg_cost, vn_pd, vn_pdg, vn_ps
from .program import SolutionBundle, duality_gap, solve as solve_program
from .traffic import bpr_integral, bpr_time, logit_shares, vn_q, vn_vf, wardrop_check

AGENTS = ("DG", "DSO", "CSA", "EV")

_RE_CLEAR_P = re.compile(r"^clear_p\[(-?\d+),(-?\d+)\]$")
_RE_CLEAR_Q = re.compile(r"^clear_q\[(-?\d+),(-?\d+),(.+)\]$")
_RE_EVCONS = re.compile(r"^evcons\[(-?\d+),(-?\d+),(-?\d+),(-?\d+)\]$")


def recover_prices(b: SolutionBundle) -> dict[tuple[int, int], float]:
    """Locational energy prices in $/pu-h: duals of the power-clearing rows."""
    out = {}
    for name, z in b.duals.items():
        m = _RE_CLEAR_P.match(name)
        if m:
            out[(int(m.group(1)), int(m.group(2)))] = z
    if not out:
        raise KeyError("bundle has no power-clearing duals")
    return out


def recover_incentives(b: SolutionBundle) -> dict[tuple[int, int, str], float]:
    """Per-vehicle incentives in $/veh: duals of the vehicle-clearing rows.

    Positive means the aggregator pays drivers to pick that station.
    """
    out = {}
    for name, z in b.duals.items():
        m = _RE_CLEAR_Q.match(name)
        if m:
            out[(int(m.group(1)), int(m.group(2)), m.group(3))] = z
    return out


def conservation_duals(b: SolutionBundle) -> dict[tuple[int, int, int, int], float]:
    """(origin, station, node, hour) -> combined-scale conservation dual."""
    out = {}
    for name, z in b.duals.items():
        m = _RE_EVCONS.match(name)
        if m:
            r, st, n, tau = (int(m.group(k)) for k in range(1, 5))
            out[(r, st, n, tau)] = z
    return out


def recover_travel_times(b: SolutionBundle, s: Scenario) -> dict[tuple[int, int, int], float]:
    """(hour, origin, station) -> equilibrium travel time in hours.

    The conservation duals live on the combined scale; multiplying the
    origin/destination dual drop by beta2/beta1 lands back in hours. Raises
    on a disconnected OD.
    """
    scale = s.behavior.beta2 / s.behavior.beta1
    eta = conservation_duals(b)
    sp = shortest_path_times(b, s)
    out = {}
    for tau in s.arrival_hours:
        origins = sorted({g.origin for g in s.groups_arriving(tau)})
        for r in origins:
            for st in s.stations:
                if math.isinf(sp[(tau, r, st)]):
                    raise ValueError(f"origin {r} cannot reach station {st}")
                out[(tau, r, st)] = scale * (eta[(r, st, r, tau)] - eta[(r, st, st, tau)])
    return out


def shortest_path_times(b: SolutionBundle, s: Scenario) -> dict[tuple[int, int, int], float]:
    """Congested shortest-path times per arrival hour, the independent route."""
    nodes = s.road_nodes
    idx = {n: k for k, n in enumerate(nodes)}
    out = {}
    for tau in s.arrival_hours:
        rows, cols, vals = [], [], []
        for a in s.road_links:
            rows.append(idx[a.from_node])
            cols.append(idx[a.to_node])
            vals.append(bpr_time(a, max(0.0, b.value(vn_vf(a.id, tau)))))
        graph = coo_matrix((vals, (rows, cols)), shape=(len(nodes), len(nodes)))
        origins = sorted({g.origin for g in s.groups_arriving(tau)})
        for r in origins:
            dist = dijkstra(graph.tocsr(), indices=idx[r])
            for st in s.stations:
                out[(tau, r, st)] = float(dist[idx[st]]) if st != r else 0.0
    return out


# ---------------------------------------------------------------------------
# agent objective restrictions and best responses
# ---------------------------------------------------------------------------

def _dg_profit_optimal(s: Scenario, rho) -> float:
    total = 0.0
    for u in s.dg_units:
        for t in s.hours:
            lo, hi = max(0.0, u.p_min[t - 1]), u.p_max[t - 1]
            margin = rho[(u.node, t)] - u.cost_linear
            if u.cost_quadratic > 0:
                p = min(max(margin / (2.0 * u.cost_quadratic), lo), hi)
            else:
                p = hi if margin > 0 else lo
            total += rho[(u.node, t)] * p - dg_cost(u, p)
    return total


def _dg_profit_at(s: Scenario, b: SolutionBundle, rho) -> float:
    total = 0.0
    for u in s.dg_units:
        for t in s.hours:
            p = b.value(vn_pdg(u.node, t))
            total += rho[(u.node, t)] * p - dg_cost(u, p)
    return total


def _dso_objective_at(s: Scenario, b: SolutionBundle, rho) -> float:
    total = 0.0
    for n in s.nodes:
        for t in s.hours:
            total += n.weight[t - 1] * b.value(vn_pd(n.id, t))
    for i in s.supply_nodes:
        for t in s.hours:
            total -= rho[(i, t)] * b.value(vn_ps(i, t))
    return total


def _csa_objective_at(s: Scenario, b: SolutionBundle, rho, alpha) -> float:
    total = 0.0
    for i, _ in s.cs_map:
        for t in s.hours:
            total += rho[(i, t)] * b.value(vn_pcs(i, t))
    for g in s.ev_groups:
        if g.fleet_size <= 0:
            continue
        for st in s.stations:
            total -= alpha[(g.origin, st, g.cls)] * b.value(vn_qp(g.origin, st, g.cls))
        for i, _ in s.cs_map:
            for t in dwell_hours(g):
                total -= max(0.0, g.degradation_cost * b.value(vn_pev(i, g.origin, g.cls, t)))
    return total


def _ev_objective_at(s: Scenario, b: SolutionBundle, alpha) -> float:
    """Drivers' minimized objective evaluated at the combined solution."""
    beh = s.behavior
    total = 0.0
    for tau in s.arrival_hours:
        for a in s.road_links:
            total += bpr_integral(a, max(0.0, b.value(vn_vf(a.id, tau))))
        for g in s.groups_arriving(tau):
            for st in s.stations:
                q = max(0.0, b.value(vn_q(g.origin, st, g.cls)))
                ent = 0.0 if q == 0.0 else q * math.log(q)
                util = 1.0 + beh.beta2 * alpha[(g.origin, st, g.cls)] + beh.beta0_of(st)
                total += (ent - util * q) / beh.beta1
    return total


def verify_agent_best_response(agent: str, b: SolutionBundle, s: Scenario,
                               tol: float = 1e-6,
                               rho=None, alpha=None) -> float:
    """Relative objective gap between the agent's own optimum and the
    combined solution restricted to that agent, at recovered prices.

    The generators' optimum is closed-form; the other agents re-solve their
    convex programs. Returns |optimal - restricted| / (1 + |optimal|);
    residuals at or below ``tol`` certify the restriction as a best response.
    """
    if agent not in AGENTS:
        raise ValueError(f"unknown agent {agent!r}")
    rho = recover_prices(b) if rho is None else rho
    alpha = recover_incentives(b) if alpha is None else alpha

    if agent == "DG":
        if not s.dg_units:
            return 0.0
        opt = _dg_profit_optimal(s, rho)
        got = _dg_profit_at(s, b, rho)
    elif agent == "DSO":
        sub = solve_program(asm.assemble_dso(s, rho), tol=1e-10, max_iter=s.solver.max_iter)
        if sub.status != "optimal":
            raise RuntimeError(f"operator subproblem {sub.status} (price scaling bug?)")
        opt = sub.objective_primal
        got = _dso_objective_at(s, b, rho)
    elif agent == "CSA":
        if not any(g.fleet_size > 0 for g in s.ev_groups):
            return 0.0
        sub = solve_program(asm.assemble_csa(s, rho, alpha), tol=1e-10,
                            max_iter=s.solver.max_iter)
        if sub.status != "optimal":
            raise RuntimeError(f"aggregator subproblem {sub.status} (price scaling bug?)")
        opt = sub.objective_primal
        got = _csa_objective_at(s, b, rho, alpha)
    else:
        if not s.arrival_hours:
            return 0.0
        sub = solve_program(asm.assemble_ev(s, alpha), tol=1e-10, max_iter=s.solver.max_iter)
        if sub.status != "optimal":
            raise RuntimeError(f"drivers' subproblem {sub.status} (incentive scaling bug?)")
        opt = -sub.objective_primal            # assembled as max of the negative
        got = _ev_objective_at(s, b, alpha)

    return abs(opt - got) / (1.0 + abs(opt))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


@dataclass(frozen=True)
class EquilibriumReport:
    prices: dict[tuple[int, int], float]
    incentives: dict[tuple[int, int, str], float]
    travel_times: dict[tuple[int, int, int], float]
    checks: tuple[CheckResult, ...]
    degenerate: bool | None = None        # duals moved under a load nudge

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed_checks(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def evaluate_equilibrium(s: Scenario, b: SolutionBundle, *,
                         gap_tol: float = 1e-8,
                         clearing_tol: float = 1e-8,
                         agent_tol: float = 1e-6,
                         logit_tol: float = 1e-4,
                         wardrop_tol: float = 1e-4,
                         degenerate: bool | None = None) -> EquilibriumReport:
    """Run the full certificate suite on an optimal bundle."""
    if b.status != "optimal":
        raise ValueError(f"cannot certify a bundle with status {b.status!r}")

    rho = recover_prices(b)
    alpha = recover_incentives(b)
    tts = recover_travel_times(b, s) if s.arrival_hours else {}
    checks: list[CheckResult] = []

    checks.append(CheckResult("duality_gap", duality_gap(b), gap_tol))
    checks.append(CheckResult("feasibility", b.feasibility_residual, clearing_tol))

    res_p = 0.0
    for i in s.supply_nodes:
        for t in s.hours:
            ps = b.value(vn_ps(i, t))
            gen = b.value(vn_pdg(i, t)) if f"pdg[{i},{t}]" in b.var_index else 0.0
            cs = b.value(vn_pcs(i, t)) if f"pcs[{i},{t}]" in b.var_index else 0.0
            res_p = max(res_p, abs(ps - gen - cs))
    checks.append(CheckResult("clearing_power", res_p, clearing_tol))

    res_q = 0.0
    for r, st, e in s.od_triples:
        res_q = max(res_q, abs(b.value(vn_qp(r, st, e)) - b.value(vn_q(r, st, e))))
    checks.append(CheckResult("clearing_vehicles", res_q, clearing_tol))

    for agent in AGENTS:
        resid = verify_agent_best_response(agent, b, s, agent_tol, rho=rho, alpha=alpha)
        checks.append(CheckResult(f"best_response_{agent}", resid, agent_tol))

    # closed-form driver checks
    logit_res = 0.0
    for g in s.ev_groups:
        if g.fleet_size <= 0:
            continue
        tau = g.t_arrive
        tt_r = {st: tts[(tau, g.origin, st)] for st in s.stations}
        al_r = {st: alpha[(g.origin, st, g.cls)] for st in s.stations}
        shares = logit_shares(tt_r, al_r, s, g.origin, g.cls)
        for st in s.stations:
            got = b.value(vn_q(g.origin, st, g.cls))
            logit_res = max(logit_res, abs(got - shares[st] * g.fleet_size) / g.fleet_size)
    checks.append(CheckResult("logit_consistency", logit_res, logit_tol))

    scale = s.behavior.beta2 / s.behavior.beta1
    eta = conservation_duals(b)
    wd_res = 0.0
    for tau in s.arrival_hours:
        eta_h = {(r, st, n): scale * z for (r, st, n, h), z in eta.items() if h == tau}
        if not eta_h:
            continue
        for v in wardrop_check(s, b, tau, eta_h, tol=wardrop_tol):
            wd_res = max(wd_res, v.deviation)
    checks.append(CheckResult("wardrop", wd_res, wardrop_tol))

    # dual travel times must agree with the congested shortest paths
    sp = shortest_path_times(b, s)
    tt_res = max((abs(tts[k] - sp[k]) for k in tts), default=0.0)
    checks.append(CheckResult("travel_time_duals", tt_res, 1e-6))

    # a strictly interior generator must be priced at its marginal cost
    mc_res = 0.0
    for u in s.dg_units:
        for t in s.hours:
            p = b.value(vn_pdg(u.node, t))
            lo, hi = max(0.0, u.p_min[t - 1]), u.p_max[t - 1]
            margin = 1e-6 * max(1.0, hi)
            if lo + margin < p < hi - margin:
                mc = u.cost_linear + 2.0 * u.cost_quadratic * p
                mc_res = max(mc_res, abs(rho[(u.node, t)] - mc))
    checks.append(CheckResult("interior_marginal_cost", mc_res, 1e-6))

    return EquilibriumReport(
        prices=rho, incentives=alpha, travel_times=tts,
        checks=tuple(checks), degenerate=degenerate,
    )


def probe_price_degeneracy(s: Scenario, b: SolutionBundle,
                           nudge: float = 1e-6, threshold: float = 1e-2) -> bool:
    """Flag dual multiplicity: nudge every load and watch the prices.

    A relative load perturbation of ``nudge`` should move prices by a
    comparable amount; a jump above ``threshold`` marks a degenerate vertex
    whose clearing duals are not unique.
    """
    nodes = tuple(
        replace(n, p_load=tuple(p * (1.0 + nudge) for p in n.p_load),
                q_load=tuple(q * (1.0 + nudge) for q in n.q_load))
        for n in s.nodes
    )
    pert = replace(s, nodes=nodes)
    b2 = asm.solve(asm.assemble(pert))
    if b2.status != "optimal":
        return True
    rho, rho2 = recover_prices(b), recover_prices(b2)
    return max(abs(rho[k] - rho2[k]) for k in rho) > threshold


# ---------------------------------------------------------------------------
# fixed-point oracle
# ---------------------------------------------------------------------------

@dataclass
class FixedPointResult:
    """Best-response iteration outcome, comparable to a solution bundle."""

    status: str                                    # converged | max-iter | oscillating
    iterations: int
    rho: dict[tuple[int, int], float]
    alpha: dict[tuple[int, int, str], float]
    values: dict[str, float]                       # primal values by variable name
    mismatch_history: list[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def fixed_point_oracle(s: Scenario, max_iter: int = 200, damping: float = 0.5,
                       tol: float = 1e-6, prox: float = 1.0) -> FixedPointResult:
    """Damped Gauss-Seidel best responses with price tatonnement.

    Each round: generators respond to prices (proximally regularized so flat
    cost segments adjust smoothly), the operator and aggregator re-solve
    their programs, drivers re-solve theirs, then prices move with excess
    demand (rho by purchased-minus-generated power, alpha by chosen-minus-
    demanded vehicles). Intended for tiny instances as an independent
    cross-check of the combined solve; non-convergence is reported, not
    raised. A growing excess trend is classified as oscillation (the damping
    is too aggressive).
    """
    groups = [g for g in s.ev_groups if g.fleet_size > 0]
    dg_lookup = {u.node: u for u in s.dg_units}
    c1s = [u.cost_linear for u in s.dg_units]
    rho0 = max(c1s) if c1s else 0.0
    rho = {(i, t): rho0 for i in s.supply_nodes for t in s.hours}
    alpha = {(g.origin, st, g.cls): 0.0 for g in groups for st in s.stations}

    pdg_prev = {(u.node, t): 0.5 * (max(0.0, u.p_min[t - 1]) + u.p_max[t - 1])
                for u in s.dg_units for t in s.hours}
    qp_prev = {k: 0.0 for k in alpha}

    history: list[float] = []
    status = "max-iter"
    it = 0
    dso_b = csa_b = ev_b = None
    for it in range(1, max_iter + 1):
        # generators: proximal best response (closed form)
        pdg = {}
        for (i, t), prev in pdg_prev.items():
            u = dg_lookup[i]
            lo, hi = max(0.0, u.p_min[t - 1]), u.p_max[t - 1]
            p = (rho[(i, t)] - u.cost_linear + prox * prev) / (2.0 * u.cost_quadratic + prox)
            pdg[(i, t)] = min(max(p, lo), hi)

        dso_b = solve_program(asm.assemble_dso(s, rho), tol=1e-10)
        if dso_b.status != "optimal":
            break

        pcs = {}
        qp = dict(qp_prev)
        if groups:
            prog = asm.assemble_csa(s, rho, alpha)
            for k, prev in qp_prev.items():
                j = prog.var(vn_qp(*k))
                prog.add_quadratic(j, prox / 2.0)
                prog.add_linear(j, prox * prev)
            csa_b = solve_program(prog, tol=1e-10)
            if csa_b.status != "optimal":
                break
            qp = {k: csa_b.value(vn_qp(*k)) for k in alpha}
            pcs = {(i, t): csa_b.value(vn_pcs(i, t))
                   for i, _ in s.cs_map for t in s.hours}

            ev_b = solve_program(asm.assemble_ev(s, alpha), tol=1e-10)
            if ev_b.status != "optimal":
                break

        excess = 0.0
        for (i, t) in rho:
            e_p = dso_b.value(vn_ps(i, t)) - pdg.get((i, t), 0.0) - pcs.get((i, t), 0.0)
            rho[(i, t)] += damping * e_p
            excess = max(excess, abs(e_p))
        for k in alpha:
            e_q = (ev_b.value(vn_q(*k)) if ev_b is not None else 0.0) - qp[k]
            alpha[k] += damping * e_q
            excess = max(excess, abs(e_q))

        drift = max((abs(pdg[k] - pdg_prev[k]) for k in pdg), default=0.0)
        history.append(max(excess, drift))
        pdg_prev, qp_prev = pdg, qp

        if excess <= tol and drift <= tol:
            status = "converged"
            break
        if len(history) >= 12 and min(history[-4:]) > 2.0 * min(history[:4]) + tol:
            status = "oscillating"
            break

    values: dict[str, float] = {}
    if dso_b is not None and dso_b.status == "optimal":
        for n in s.nodes:
            for t in s.hours:
                values[vn_pd(n.id, t)] = dso_b.value(vn_pd(n.id, t))
    for (i, t), p in pdg_prev.items():
        values[vn_pdg(i, t)] = p
    if groups and csa_b is not None and csa_b.status == "optimal":
        for i, _ in s.cs_map:
            for t in s.hours:
                values[vn_pcs(i, t)] = csa_b.value(vn_pcs(i, t))
        for k, v in qp_prev.items():
            values[vn_qp(*k)] = v
        for g in groups:
            for t in window_hours(g):
                values[f"soc[{g.origin},{g.cls},{t}]"] = csa_b.value(f"soc[{g.origin},{g.cls},{t}]")
    if groups and ev_b is not None and ev_b.status == "optimal":
        for k in alpha:
            values[vn_q(*k)] = ev_b.value(vn_q(*k))

    return FixedPointResult(
        status=status, iterations=it, rho=dict(rho), alpha=dict(alpha),
        values=values, mismatch_history=history,
    )


def compare_fixed_point(fp: FixedPointResult, b: SolutionBundle) -> float:
    """Largest disagreement between oracle primal values and a bundle."""
    return max((abs(v - b.value(name)) for name, v in fp.values.items()), default=0.0)
