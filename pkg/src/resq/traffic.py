"""Traffic side: congestion costs, assignment rows, and choice checks.

EVs arriving at a given hour are assigned on a static snapshot of the road
network for that hour. Destination (station) choice follows a multinomial
logit over attractiveness, travel time, and incentives; route choice follows
the first Wardrop principle. Both emerge from one convex block per arrival
hour: the sum of link delay integrals plus an entropy term over destination
flows. The formulation is link-node: per-OD link flows, no path enumeration;
Wardrop is checked afterwards through reduced costs on links.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .model import RoadLink, Scenario
from .program import ConvexProgram, SolutionBundle


def vn_x(r, s_, a, tau): return f"x[{r},{s_},{a},{tau}]"
def vn_xb(o, d, a, tau): return f"xb[{o},{d},{a},{tau}]"
def vn_vf(a, tau): return f"vf[{a},{tau}]"
def vn_q(r, s_, e): return f"q[{r},{s_},{e}]"


def bpr_time(link: RoadLink, v: float) -> float:
    """Link travel time (h) at flow ``v`` (veh/h)."""
    if v < 0:
        raise ValueError(f"negative flow {v} on link {link.id}")
    return link.t0 * (1.0 + link.bpr_alpha * (v / link.capacity) ** link.bpr_beta)


def bpr_integral(link: RoadLink, v: float) -> float:
    """Area under the link delay curve from 0 to ``v`` (veh-h).

    Closed form t0*(v + a*v**(b+1) / ((b+1)*cap**b)); strictly convex in v
    for b >= 1.
    """
    if v < 0:
        raise ValueError(f"negative flow {v} on link {link.id}")
    b = link.bpr_beta
    return link.t0 * (v + link.bpr_alpha * v ** (b + 1.0) / ((b + 1.0) * link.capacity ** b))


def logit_shares(tt: dict[int, float], alpha: dict[int, float],
                 s: Scenario, r: int, e: str) -> dict[int, float]:
    """Station choice probabilities for class-``e`` drivers from origin ``r``.

    Utilities combine attractiveness, travel time, and incentive; the max
    utility is shifted out before exponentiation so the softmax never
    overflows. Shares sum to one.
    """
    beh = s.behavior
    stations = s.stations
    u = {}
    for st in stations:
        u[st] = beh.beta0_of(st) - beh.beta1 * tt[st] + beh.beta2 * alpha[st]
    m = max(u.values())
    w = {st: math.exp(u[st] - m) for st in stations}
    z = sum(w.values())
    return {st: w[st] / z for st in stations}


@dataclass(frozen=True)
class TrafficBlock:
    """Handles for one arrival hour of assignment rows."""

    tau: int
    ev_ods: tuple[tuple[int, int], ...]              # (origin, station) pairs
    classes: tuple[tuple[int, str], ...]             # (origin, class) groups this hour
    bg_ods: tuple[tuple[int, int], ...]              # background (origin, destination)
    nodes: tuple[int, ...]


def build_traffic_block(prog: ConvexProgram, s: Scenario, tau: int, *,
                        weight: float = 1.0,
                        alpha: dict[tuple[int, int, str], float] | None = None) -> TrafficBlock:
    """Register arrival-hour ``tau`` assignment variables and rows on ``prog``.

    Emits flow aggregation per link, per-OD conservation at every node (EV
    rows carry the travel-time duals), background conservation, and the
    demand totals per (origin, class). The objective contribution is the
    drivers' program scaled by ``weight``: delay integrals times ``weight``
    and the entropy/utility part times ``weight``/beta1. ``alpha`` supplies
    fixed incentives for a stand-alone drivers' program; the combined
    assembly omits it (incentives enter through the clearing rows instead)
    and passes weight beta1/beta2 to land on the market scaling.
    """
    beh = s.behavior
    groups = s.groups_arriving(tau)
    origins = sorted({g.origin for g in groups})
    stations = s.stations
    all_nodes = s.road_nodes
    q_floor = s.solver.q_floor

    bg = [(od, dem) for od in s.background_od
          for t, dem in od.demand if t == tau and dem > 0]
    for od, _ in bg:
        if od.origin not in all_nodes or od.destination not in all_nodes:
            raise ValueError(
                f"background OD ({od.origin},{od.destination}) not on the road graph")
    for g in groups:
        if g.origin not in all_nodes:
            raise ValueError(f"EV origin {g.origin} not on the road graph")

    ev_ods = [(r, st) for r in origins for st in stations]

    # link flows: per-OD plus the congested total
    for r, st in ev_ods:
        for a in s.road_links:
            prog.add_var(vn_x(r, st, a.id, tau), lb=0.0)
    for od, _ in bg:
        for a in s.road_links:
            prog.add_var(vn_xb(od.origin, od.destination, a.id, tau), lb=0.0)
    for a in s.road_links:
        vf = prog.add_var(vn_vf(a.id, tau), lb=0.0)
        coef = {vf: 1.0}
        for r, st in ev_ods:
            coef[prog.var(vn_x(r, st, a.id, tau))] = -1.0
        for od, _ in bg:
            coef[prog.var(vn_xb(od.origin, od.destination, a.id, tau))] = -1.0
        prog.add_eq(f"vagg[{a.id},{tau}]", coef, 0.0)

        # delay integral: weight * t0 * (v + alpha v^(b+1) / ((b+1) cap^b))
        prog.add_linear(vf, -weight * a.t0)
        if a.bpr_alpha > 0:
            prog.add_power(
                vf,
                weight * a.t0 * a.bpr_alpha / ((a.bpr_beta + 1.0) * a.capacity ** a.bpr_beta),
                a.bpr_beta + 1.0,
            )

    # destination flows with entropy; utility terms scale with weight/beta1
    for g in groups:
        for st in stations:
            q = prog.add_var(vn_q(g.origin, st, g.cls), lb=q_floor)
            prog.add_entropy(q, weight / beh.beta1)
            util = 1.0 + beh.beta0_of(st)
            if alpha is not None:
                util += beh.beta2 * alpha[(g.origin, st, g.cls)]
            prog.add_linear(q, weight / beh.beta1 * util)
        coef = {prog.var(vn_q(g.origin, st, g.cls)): 1.0 for st in stations}
        prog.add_eq(f"qtot[{g.origin},{g.cls}]", coef, g.fleet_size)

    # conservation per OD and node: (demand incidence) - (link divergence) = 0
    for r, st in ev_ods:
        for n in all_nodes:
            coef: dict[int, float] = {}
            for a in s.road_links:
                j = prog.var(vn_x(r, st, a.id, tau))
                if a.from_node == n:
                    coef[j] = coef.get(j, 0.0) - 1.0
                if a.to_node == n:
                    coef[j] = coef.get(j, 0.0) + 1.0
            inc = (1.0 if n == r else 0.0) - (1.0 if n == st else 0.0)
            for g in groups:
                if g.origin == r and inc:
                    coef[prog.var(vn_q(r, st, g.cls))] = inc
            prog.add_eq(f"evcons[{r},{st},{n},{tau}]", coef, 0.0)

    for od, dem in bg:
        o, d = od.origin, od.destination
        for n in all_nodes:
            coef = {}
            for a in s.road_links:
                j = prog.var(vn_xb(o, d, a.id, tau))
                if a.from_node == n:
                    coef[j] = coef.get(j, 0.0) - 1.0
                if a.to_node == n:
                    coef[j] = coef.get(j, 0.0) + 1.0
            inc = (1.0 if n == o else 0.0) - (1.0 if n == d else 0.0)
            prog.add_eq(f"bgcons[{o},{d},{n},{tau}]", coef, -dem * inc)

    return TrafficBlock(
        tau=tau,
        ev_ods=tuple(ev_ods),
        classes=tuple((g.origin, g.cls) for g in groups),
        bg_ods=tuple((od.origin, od.destination) for od, _ in bg),
        nodes=tuple(all_nodes),
    )


@dataclass(frozen=True)
class WardropViolation:
    tau: int
    origin: int
    station: int
    link: int
    used: bool
    travel_time: float
    dual_difference: float

    @property
    def deviation(self) -> float:
        if self.used:
            return abs(self.travel_time - self.dual_difference)
        return max(0.0, self.dual_difference - self.travel_time)


def wardrop_check(s: Scenario, bundle: SolutionBundle, tau: int,
                  eta: dict[tuple[int, int, int], float],
                  tol: float = 1e-4) -> list[WardropViolation]:
    """Reduced-cost route-choice check for arrival hour ``tau``.

    ``eta`` maps (origin, station, node) to conservation duals in time units.
    Used links must sit on a shortest path (time equals the dual drop across
    the link); unused links must not be shorter. Returns every violation.
    """
    groups = s.groups_arriving(tau)
    origins = sorted({g.origin for g in groups})
    out: list[WardropViolation] = []
    for r in origins:
        for st in s.stations:
            for a in s.road_links:
                key_f = (r, st, a.from_node)
                key_t = (r, st, a.to_node)
                if key_f not in eta or key_t not in eta:
                    raise KeyError(f"missing conservation dual for OD ({r},{st}) at hour {tau}")
                flow = bundle.value(vn_x(r, st, a.id, tau))
                tt_a = bpr_time(a, max(0.0, bundle.value(vn_vf(a.id, tau))))
                diff = eta[key_f] - eta[key_t]
                used = flow > tol
                bad = abs(tt_a - diff) > tol if used else tt_a < diff - tol
                if bad:
                    out.append(WardropViolation(tau, r, st, a.id, used, tt_a, diff))
    return out
