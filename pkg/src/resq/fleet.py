"""Aggregated EV fleet constraints: SOC dynamics, departure floors, station
power, and the linear degradation surrogate.

Each (origin, class) group pools its vehicles' state of charge into a single
SOC-sum trajectory over the dwell window. Charge/discharge power is carried
per (station, origin, class, hour) in kWh/h with discharge positive; station
injections are the per-unit aggregate on the system base. Battery wear is
charged on discharge throughput only, through an epigraph variable per power
variable. An optional charger rating bounds station power by the number of
vehicles parked there.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import EvGroup, Scenario
from .program import ConvexProgram, SolutionBundle


def vn_pev(i, r, e, t): return f"pev[{i},{r},{e},{t}]"
def vn_soc(r, e, t): return f"soc[{r},{e},{t}]"
def vn_qp(r, s_, e): return f"qp[{r},{s_},{e}]"
def vn_pcs(i, t): return f"pcs[{i},{t}]"
def vn_deg(i, r, e, t): return f"deg[{i},{r},{e},{t}]"


def dwell_hours(g: EvGroup) -> range:
    """Hours with power variables: after arrival, through departure."""
    return range(g.t_arrive + 1, g.t_depart + 1)


def window_hours(g: EvGroup) -> range:
    """Hours with a defined SOC, arrival through departure inclusive."""
    return range(g.t_arrive, g.t_depart + 1)


@dataclass(frozen=True)
class FleetBlock:
    groups: tuple[EvGroup, ...]
    stations: tuple[int, ...]          # distribution-side station nodes


def build_fleet_block(prog: ConvexProgram, s: Scenario) -> FleetBlock:
    """Register fleet variables and rows on ``prog``.

    Per group: SOC dynamics over the dwell window, SOC box scaled by assigned
    vehicles, the arrival pin, and the departure floor. Per station-hour: the
    per-unit aggregation of all plugged-in power. Adds degradation epigraph
    rows and their objective charge, plus the charger rating if configured.
    """
    groups = [g for g in s.ev_groups if g.fleet_size > 0]
    cs_nodes = [i for i, _ in s.cs_map]
    p_chg = s.solver.charger_kw_per_vehicle

    for g in groups:
        r, e = g.origin, g.cls
        for st in s.stations:
            prog.add_var(vn_qp(r, st, e), lb=0.0)
        for t in window_hours(g):
            prog.add_var(vn_soc(r, e, t))
        for i in cs_nodes:
            for t in dwell_hours(g):
                prog.add_var(vn_pev(i, r, e, t))

    # station aggregation in pu on the system base, all hours
    for i in cs_nodes:
        for t in s.hours:
            pcs = prog.add_var(vn_pcs(i, t))
            coef = {pcs: 1.0}
            for g in groups:
                if t in dwell_hours(g):
                    coef[prog.var(vn_pev(i, g.origin, g.cls, t))] = -1.0 / s.s_base
            prog.add_eq(f"csagg[{i},{t}]", coef, 0.0)

    for g in groups:
        r, e = g.origin, g.cls
        vehicles = {st: prog.var(vn_qp(r, st, e)) for st in s.stations}

        # SOC-sum dynamics: discharge (positive p) draws the pool down
        for t in dwell_hours(g):
            coef = {prog.var(vn_soc(r, e, t)): 1.0,
                    prog.var(vn_soc(r, e, t - 1)): -1.0}
            for i in cs_nodes:
                coef[prog.var(vn_pev(i, r, e, t))] = 1.0 / g.battery_kwh
            prog.add_eq(f"soc[{r},{e},{t}]", coef, 0.0)

        # box scaled by assigned vehicles, arrival pin, departure floor
        for t in window_hours(g):
            soc = prog.var(vn_soc(r, e, t))
            lo = {soc: -1.0}
            hi = {soc: 1.0}
            for st, j in vehicles.items():
                lo[j] = g.soc_min
                hi[j] = -g.soc_max
            prog.add_le(f"socbox_lo[{r},{e},{t}]", lo, 0.0)
            prog.add_le(f"socbox_hi[{r},{e},{t}]", hi, 0.0)

        coef = {prog.var(vn_soc(r, e, g.t_arrive)): 1.0}
        for st, j in vehicles.items():
            coef[j] = -g.soc_arrive
        prog.add_eq(f"arr[{r},{e}]", coef, 0.0)

        coef = {prog.var(vn_soc(r, e, g.t_depart)): -1.0}
        for st, j in vehicles.items():
            coef[j] = g.soc_depart_min
        prog.add_le(f"dep[{r},{e}]", coef, 0.0)

    degradation_cost_rows(prog, s, groups)

    # charger rating: station power bounded by plugged-in vehicle count
    if p_chg > 0:
        origins = sorted({g.origin for g in groups})
        for i, st in s.cs_map:
            for r in origins:
                for t in s.hours:
                    present = [g for g in groups
                               if g.origin == r and t in dwell_hours(g)]
                    if not present:
                        continue
                    up: dict[int, float] = {}
                    lo: dict[int, float] = {}
                    for g in present:
                        j = prog.var(vn_pev(i, r, g.cls, t))
                        up[j] = 1.0
                        lo[j] = -1.0
                        jq = prog.var(vn_qp(r, st, g.cls))
                        up[jq] = up.get(jq, 0.0) - p_chg
                        lo[jq] = lo.get(jq, 0.0) - p_chg
                    prog.add_le(f"chg_up[{i},{r},{t}]", up, 0.0)
                    prog.add_le(f"chg_lo[{i},{r},{t}]", lo, 0.0)

    return FleetBlock(groups=tuple(groups), stations=tuple(cs_nodes))


def degradation_cost_rows(prog: ConvexProgram, s: Scenario, groups=None) -> None:
    """Epigraph rows d >= c_deg * p, d >= 0; the objective pays sum(d).

    Wear is charged on discharged energy only: charging hours settle at
    d = 0 under cost-minimizing pressure.
    """
    if groups is None:
        groups = [g for g in s.ev_groups if g.fleet_size > 0]
    cs_nodes = [i for i, _ in s.cs_map]
    for g in groups:
        r, e = g.origin, g.cls
        for i in cs_nodes:
            for t in dwell_hours(g):
                d = prog.add_var(vn_deg(i, r, e, t), lb=0.0)
                prog.add_le(f"deg_lin[{i},{r},{e},{t}]",
                            {prog.var(vn_pev(i, r, e, t)): g.degradation_cost, d: -1.0},
                            0.0)
                prog.add_linear(d, -1.0)


def station_injection_series(bundle: SolutionBundle, s: Scenario) -> dict[int, list[float]]:
    """Per-station hourly injection into the feeder (pu, positive = inject)."""
    return {i: [bundle.value(vn_pcs(i, t)) for t in s.hours] for i, _ in s.cs_map}
