"""Linearized branch-flow constraint builders for the restoration problem.

Per hour, the feeder is described over squared voltage magnitudes and branch
active/reactive flows. Line outages are exogenous data: an out-of-service
line has its flows fixed to zero and its voltage-drop pair relaxed by a
big-K constant; an in-service line couples endpoint voltages through the
impedance and keeps its apparent power inside a second-order cone. The model
is lossless and imposes no slack bus: an islanded section is constrained
only by its voltage band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import DistLine, DgUnit, Scenario
from .program import ConvexProgram, SolutionBundle


# stable variable / row name builders
def vn_pd(i, t): return f"pd[{i},{t}]"
def vn_qd(i, t): return f"qd[{i},{t}]"
def vn_ps(i, t): return f"ps[{i},{t}]"
def vn_qs(i, t): return f"qs[{i},{t}]"
def vn_v(i, t): return f"v[{i},{t}]"
def vn_pf(l, t): return f"pf[{l},{t}]"
def vn_qf(l, t): return f"qf[{l},{t}]"
def vn_pdg(i, t): return f"pdg[{i},{t}]"


@dataclass(frozen=True)
class PowerBlock:
    """Handles for one hour of feeder rows: variable and row names by index."""

    t: int
    status: dict[int, int]            # line id -> in service this hour
    big_k: dict[int, float]           # line id -> relaxation constant


def compute_bigK(line: DistLine, nodes) -> float:
    """Relaxation constant making the voltage-drop pair vacuous at outage.

    Sized from the endpoint voltage bands plus the largest impedance drop any
    capacity-feasible flow can produce.
    """
    ends = {line.from_node, line.to_node}
    vmax = max(n.v_max for n in nodes if n.id in ends)
    vmin = min(n.v_min for n in nodes if n.id in ends)
    return (vmax**2 - vmin**2) + 2.0 * (line.r + line.x) * math.sqrt(2.0) * line.s_max


def dg_cost(unit: DgUnit, p: float) -> float:
    """Production cost in $/h at output ``p`` (pu)."""
    return unit.cost_linear * p + unit.cost_quadratic * p * p


def build_power_block(prog: ConvexProgram, s: Scenario, t: int, *,
                      include_dg: bool = True) -> PowerBlock:
    """Register hour-``t`` feeder variables and rows on ``prog``.

    Emits nodal active/reactive balances, served-load caps, the constant
    power-factor tie, per-line cone capacity (or zero-fix under outage), the
    big-K voltage-drop pair, voltage bands, and generator output bounds.
    Objective contributions: served-load value and generation cost.
    ``include_dg=False`` leaves the generator side out (the operator's
    stand-alone program couples to generation only through prices).
    """
    k = t - 1
    supply = set(s.supply_nodes)

    for n in s.nodes:
        i = n.id
        pbar, qbar = n.p_load[k], n.q_load[k]
        if pbar == 0.0 and qbar != 0.0:
            raise ValueError(f"node {i} hour {t}: reactive load without active load")

        pd = prog.add_var(vn_pd(i, t), lb=0.0, ub=pbar)
        qd = prog.add_var(vn_qd(i, t))
        prog.add_var(vn_v(i, t), lb=n.v_min**2, ub=n.v_max**2)
        if i in supply:
            prog.add_var(vn_ps(i, t))
            prog.add_var(vn_qs(i, t))

        # load keeps its expected power factor; zero demand pins both parts
        if pbar > 0.0:
            prog.add_eq(f"pfac[{i},{t}]", {qd: 1.0, pd: -qbar / pbar}, 0.0)
        else:
            prog.add_eq(f"pfac[{i},{t}]", {qd: 1.0}, 0.0)

        prog.add_linear(pd, n.weight[k])

    status: dict[int, int] = {}
    big_k: dict[int, float] = {}
    for line in s.lines:
        l = line.id
        lam = line.in_service(t)
        status[l] = lam
        K = compute_bigK(line, s.nodes)
        big_k[l] = K

        pf = prog.add_var(vn_pf(l, t))
        qf = prog.add_var(vn_qf(l, t))
        if lam:
            prog.add_soc(f"cone[{l},{t}]", line.s_max, [pf, qf])
        else:
            prog.add_eq(f"outp[{l},{t}]", {pf: 1.0}, 0.0)
            prog.add_eq(f"outq[{l},{t}]", {qf: 1.0}, 0.0)

        vf = prog.var(vn_v(line.from_node, t))
        vt = prog.var(vn_v(line.to_node, t))
        # v_from - v_to - 2(r pf + x qf) <= (1-lam) K, and >= -(1-lam) K
        slack = (1 - lam) * K
        prog.add_le(f"vdrop_up[{l},{t}]",
                    {vf: 1.0, vt: -1.0, pf: -2.0 * line.r, qf: -2.0 * line.x}, slack)
        prog.add_le(f"vdrop_lo[{l},{t}]",
                    {vf: -1.0, vt: 1.0, pf: 2.0 * line.r, qf: 2.0 * line.x}, slack)

    if include_dg:
        for u in s.dg_units:
            i = u.node
            pdg = prog.add_var(vn_pdg(i, t), lb=max(0.0, u.p_min[k]), ub=u.p_max[k])
            prog.add_linear(pdg, -u.cost_linear)
            if u.cost_quadratic > 0:
                prog.add_quadratic(pdg, u.cost_quadratic)

    # nodal balances: inflow - outflow = demand - supply
    for n in s.nodes:
        i = n.id
        pcoef: dict[int, float] = {}
        qcoef: dict[int, float] = {}
        for line in s.lines:
            sign = 1.0 if line.to_node == i else (-1.0 if line.from_node == i else 0.0)
            if sign:
                pcoef[prog.var(vn_pf(line.id, t))] = sign
                qcoef[prog.var(vn_qf(line.id, t))] = sign
        pcoef[prog.var(vn_pd(i, t))] = -1.0
        qcoef[prog.var(vn_qd(i, t))] = -1.0
        if i in supply:
            pcoef[prog.var(vn_ps(i, t))] = 1.0
            qcoef[prog.var(vn_qs(i, t))] = 1.0
        prog.add_eq(f"pbal[{i},{t}]", pcoef, 0.0)
        prog.add_eq(f"qbal[{i},{t}]", qcoef, 0.0)

    return PowerBlock(t=t, status=status, big_k=big_k)


def served_load_metrics(bundle: SolutionBundle, s: Scenario) -> dict:
    """Total unserved energy and per-node served series from a solved system.

    Returns ``total_load_loss`` (pu-h over load nodes), ``weighted_served``
    ($), and ``served`` mapping node -> hourly served list.
    """
    served: dict[int, list[float]] = {}
    loss = 0.0
    weighted = 0.0
    for n in s.nodes:
        row = [bundle.value(vn_pd(n.id, t)) for t in s.hours]
        served[n.id] = row
        for k, t in enumerate(s.hours):
            weighted += n.weight[k] * row[k]
            if n.is_load:
                loss += n.p_load[k] - row[k]
    return {"total_load_loss": loss, "weighted_served": weighted, "served": served}
