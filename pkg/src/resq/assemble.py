"""Assembly of the market problem as one concave program, plus the
single-agent programs used to certify its solution.

The combined objective is served-load value minus generation cost minus
battery wear, minus the drivers' delay integrals weighted by beta1/beta2 and
the destination entropy weighted by 1/beta2. Under that exact weighting the
incentive terms of the individual objectives cancel against the clearing
rows, so the duals of ``clear_p[i,t]`` are locational energy prices in
$/pu-h and the duals of ``clear_q[r,s,e]`` are per-vehicle incentives in
$/veh, with no rescaling.

Agent programs share the same block builders: the operator's program prices
purchases at fixed rho; the aggregator's prices station energy at fixed rho
and vehicles at fixed alpha; the drivers' program takes fixed alpha at unit
weight. A solution of the combined program restricted to each agent's
variables is optimal for that agent's program at the recovered prices; that
equivalence is what the verification module checks.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fleet import FleetBlock, build_fleet_block, vn_pcs, vn_qp
from .model import Scenario, validate_scenario
from .power import PowerBlock, build_power_block, vn_pdg, vn_ps
from .program import ConvexProgram, SolutionBundle, duality_gap, solve as solve_program
from .traffic import TrafficBlock, build_traffic_block, vn_q

__all__ = [
    "CombinedProgram", "assemble", "solve", "duality_gap",
    "assemble_dso", "assemble_csa", "assemble_ev",
]


@dataclass
class CombinedProgram:
    """The assembled market program with its block handles."""

    program: ConvexProgram
    scenario: Scenario
    power_blocks: tuple[PowerBlock, ...]
    fleet_block: FleetBlock
    traffic_blocks: tuple[TrafficBlock, ...]
    clear_p_rows: tuple[str, ...]
    clear_q_rows: tuple[str, ...]


def assemble(s: Scenario) -> CombinedProgram:
    """Build the full concave program for scenario ``s``.

    Requires a valid scenario. Emits every feeder, fleet, and traffic row,
    then the market-clearing rows: purchased power equals generation plus
    station injection per supply node-hour, and demanded vehicles equal
    chosen vehicles per (origin, station, class). Runs the concavity guard
    before returning.
    """
    violations = validate_scenario(s)
    if violations:
        raise ValueError("invalid scenario:\n  " + "\n  ".join(violations))

    beh = s.behavior
    prog = ConvexProgram()

    power_blocks = tuple(build_power_block(prog, s, t) for t in s.hours)
    fleet_block = build_fleet_block(prog, s)
    traffic_blocks = tuple(
        build_traffic_block(prog, s, tau, weight=beh.beta1 / beh.beta2)
        for tau in s.arrival_hours
    )

    cs_nodes = {i for i, _ in s.cs_map}
    dg_nodes = {u.node for u in s.dg_units}
    clear_p: list[str] = []
    for i in s.supply_nodes:
        for t in s.hours:
            coef = {prog.var(vn_ps(i, t)): 1.0}
            if i in dg_nodes:
                coef[prog.var(vn_pdg(i, t))] = -1.0
            if i in cs_nodes:
                coef[prog.var(vn_pcs(i, t))] = -1.0
            name = f"clear_p[{i},{t}]"
            prog.add_eq(name, coef, 0.0)
            clear_p.append(name)

    clear_q: list[str] = []
    for r, st, e in s.od_triples:
        name = f"clear_q[{r},{st},{e}]"
        prog.add_eq(name, {prog.var(vn_qp(r, st, e)): 1.0,
                           prog.var(vn_q(r, st, e)): -1.0}, 0.0)
        clear_q.append(name)

    prog.check_concave()

    return CombinedProgram(
        program=prog,
        scenario=s,
        power_blocks=power_blocks,
        fleet_block=fleet_block,
        traffic_blocks=traffic_blocks,
        clear_p_rows=tuple(clear_p),
        clear_q_rows=tuple(clear_q),
    )


def solve(cp: CombinedProgram, tol: float | None = None) -> SolutionBundle:
    """Solve the combined program to primal-dual optimality."""
    st = cp.scenario.solver
    return solve_program(cp.program, tol=st.tol if tol is None else tol,
                         max_iter=st.max_iter)


# ---------------------------------------------------------------------------
# single-agent programs
# ---------------------------------------------------------------------------

def assemble_dso(s: Scenario, rho: dict[tuple[int, int], float]) -> ConvexProgram:
    """Operator's program: maximize served value minus purchases at fixed rho."""
    prog = ConvexProgram()
    for t in s.hours:
        build_power_block(prog, s, t, include_dg=False)
    for i in s.supply_nodes:
        for t in s.hours:
            prog.add_linear(prog.var(vn_ps(i, t)), -rho[(i, t)])
    return prog


def assemble_csa(s: Scenario, rho: dict[tuple[int, int], float],
                 alpha: dict[tuple[int, int, str], float],
                 box: float | None = None) -> ConvexProgram:
    """Aggregator's program at fixed prices and incentives.

    ``box`` caps each station's vehicle demand (default 10x the total fleet):
    inactive at any equilibrium, it keeps the program bounded when price
    noise would otherwise open a profitable ray.
    """
    prog = ConvexProgram()
    build_fleet_block(prog, s)
    groups = [g for g in s.ev_groups if g.fleet_size > 0]
    if box is None:
        box = 10.0 * max(1.0, sum(g.fleet_size for g in groups))
    for i, _ in s.cs_map:
        for t in s.hours:
            prog.add_linear(prog.var(vn_pcs(i, t)), rho[(i, t)])
    for g in groups:
        for st in s.stations:
            j = prog.var(vn_qp(g.origin, st, g.cls))
            prog.add_linear(j, -alpha[(g.origin, st, g.cls)])
            prog.add_le(f"qpbox[{g.origin},{st},{g.cls}]", {j: 1.0}, box)
    return prog


def assemble_ev(s: Scenario, alpha: dict[tuple[int, int, str], float]) -> ConvexProgram:
    """Drivers' program at fixed incentives, all arrival hours, unit weight.

    Assembled in maximize form; the drivers' objective value is the negative
    of this program's optimum.
    """
    prog = ConvexProgram()
    for tau in s.arrival_hours:
        build_traffic_block(prog, s, tau, weight=1.0, alpha=alpha)
    return prog
