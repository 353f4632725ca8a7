"""Domain model for a coupled distribution/transport restoration scenario.

A scenario bundles the distribution feeder (nodes, lines, dispatchable
generators), the road network, the EV fleet groups parked at charging
stations, optional background traffic demand, and the behavioral and solver
parameters. All power quantities are per-unit on ``s_base``; EV battery
quantities stay in kWh and are converted once during assembly. Hours are
1-based integers on a fixed horizon (default 24), and energy equals power
times one hour.

Scenarios are immutable after loading and safe to share across concurrent
solves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed into a valid Scenario."""

    def __init__(self, locus: str, message: str):
        self.locus = locus
        super().__init__(f"{locus}: {message}")


def _hourly(value, horizon: int, locus: str) -> tuple[float, ...]:
    """Expand a scalar or per-hour list into a tuple of length ``horizon``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),) * horizon
    if isinstance(value, (list, tuple)):
        if len(value) != horizon:
            raise ScenarioError(locus, f"expected {horizon} hourly values, got {len(value)}")
        return tuple(float(v) for v in value)
    raise ScenarioError(locus, f"expected number or list of {horizon} numbers")


@dataclass(frozen=True)
class DistNode:
    """Distribution node: optional load, generator and charging-station roles."""

    id: int
    is_load: bool
    is_dg: bool
    is_cs: bool
    weight: tuple[float, ...]        # served-load priority, $/pu-h, per hour
    p_load: tuple[float, ...]        # expected active demand, pu, per hour
    q_load: tuple[float, ...]        # expected reactive demand, pu, per hour
    v_min: float                     # lower voltage bound, pu
    v_max: float                     # upper voltage bound, pu


@dataclass(frozen=True)
class DistLine:
    """Distribution line with an exogenous outage schedule."""

    id: int
    from_node: int
    to_node: int
    r: float                         # resistance, pu
    x: float                         # reactance, pu
    s_max: float                     # apparent-power capacity, pu
    outages: tuple[tuple[int, int], ...] = ()   # half-open hour windows [from_t, to_t)

    def in_service(self, t: int) -> int:
        """Line status at hour ``t``: 0 inside an outage window, else 1."""
        for from_t, to_t in self.outages:
            if from_t <= t < to_t:
                return 0
        return 1


@dataclass(frozen=True)
class DgUnit:
    """Dispatchable generator at a distribution node, convex production cost."""

    node: int
    p_min: tuple[float, ...]         # pu, per hour
    p_max: tuple[float, ...]         # pu, per hour
    cost_linear: float               # $/pu-h
    cost_quadratic: float            # $/pu^2-h, >= 0


@dataclass(frozen=True)
class RoadLink:
    """Directed road link with a volume-delay (BPR-style) cost function."""

    id: int
    from_node: int
    to_node: int
    t0: float                        # free-flow time, h
    capacity: float                  # veh/h
    bpr_alpha: float = 0.15
    bpr_beta: float = 4.0


@dataclass(frozen=True)
class EvGroup:
    """Homogeneous EV fleet group: one origin, one vehicle class."""

    origin: int                      # transport node the group departs from
    cls: str                         # vehicle-class label (class-level fields must agree)
    t_arrive: int                    # arrival hour (SOC pinned here; power flows start next hour)
    t_depart: int                    # departure hour (SOC floor applies here)
    soc_arrive: float                # arrival state of charge, fraction
    soc_depart_min: float            # minimum departure state of charge, fraction
    soc_min: float                   # battery lower bound, fraction
    soc_max: float                   # battery upper bound, fraction
    battery_kwh: float               # usable capacity per vehicle
    fleet_size: float                # vehicles in the group
    degradation_cost: float          # $/kWh discharged


@dataclass(frozen=True)
class BackgroundOd:
    """Fixed-demand origin-destination pair for conventional traffic."""

    origin: int
    destination: int
    demand: tuple[tuple[int, float], ...]    # (hour, veh/h) pairs


@dataclass(frozen=True)
class Behavior:
    """Charging-location choice parameters."""

    beta1: float = 1.0               # travel-time sensitivity, 1/h
    beta2: float = 1.0               # incentive sensitivity, 1/$
    beta0: tuple[tuple[int, float], ...] = ()   # station attractiveness by transport node

    def beta0_of(self, station: int) -> float:
        for s, v in self.beta0:
            if s == station:
                return v
        return 0.0


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-8                # relative duality-gap target
    max_iter: int = 200
    horizon: int = 24
    charger_kw_per_vehicle: float = 10.0
    q_floor: float = 1e-12           # interior floor protecting ln(q)


@dataclass(frozen=True)
class Scenario:
    """Immutable full instance of the coupled restoration problem."""

    s_base: float                    # system base, kVA
    nodes: tuple[DistNode, ...]
    lines: tuple[DistLine, ...]
    dg_units: tuple[DgUnit, ...]
    road_links: tuple[RoadLink, ...]
    ev_groups: tuple[EvGroup, ...]
    background_od: tuple[BackgroundOd, ...]
    cs_map: tuple[tuple[int, int], ...]       # (distribution node, transport node)
    behavior: Behavior = Behavior()
    solver: SolverSettings = SolverSettings()

    # -- index helpers -----------------------------------------------------

    @property
    def horizon(self) -> int:
        return self.solver.horizon

    @property
    def hours(self) -> range:
        return range(1, self.horizon + 1)

    def node(self, i: int) -> DistNode:
        return self._node_index()[i]

    def _node_index(self) -> dict[int, DistNode]:
        return {n.id: n for n in self.nodes}

    def line(self, l: int) -> DistLine:
        for ln in self.lines:
            if ln.id == l:
                return ln
        raise KeyError(f"no line {l}")

    @property
    def load_nodes(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_load]

    @property
    def dg_nodes(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_dg]

    @property
    def cs_nodes(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_cs]

    @property
    def supply_nodes(self) -> list[int]:
        """Nodes where the operator purchases energy: generators and stations."""
        return [n.id for n in self.nodes if n.is_dg or n.is_cs]

    @property
    def stations(self) -> list[int]:
        """Transport nodes hosting a charging station, in map order."""
        return [s for _, s in self.cs_map]

    def station_node(self, transport_node: int) -> int:
        """Distribution node of the station at ``transport_node``."""
        for i, s in self.cs_map:
            if s == transport_node:
                return i
        raise KeyError(f"no station at transport node {transport_node}")

    def transport_node(self, dist_node: int) -> int:
        for i, s in self.cs_map:
            if i == dist_node:
                return s
        raise KeyError(f"no station at distribution node {dist_node}")

    @property
    def road_nodes(self) -> list[int]:
        ns: set[int] = set()
        for a in self.road_links:
            ns.add(a.from_node)
            ns.add(a.to_node)
        return sorted(ns)

    @property
    def arrival_hours(self) -> list[int]:
        """Hours with new traffic: EV arrivals plus background demand."""
        hs = {g.t_arrive for g in self.ev_groups if g.fleet_size > 0}
        for od in self.background_od:
            hs.update(t for t, d in od.demand if d > 0)
        return sorted(hs)

    def groups_arriving(self, tau: int) -> list[EvGroup]:
        return [g for g in self.ev_groups if g.t_arrive == tau and g.fleet_size > 0]

    @property
    def od_triples(self) -> list[tuple[int, int, str]]:
        """(origin, station, class) triples in deterministic order."""
        out = []
        for g in self.ev_groups:
            if g.fleet_size > 0:
                for s in self.stations:
                    out.append((g.origin, s, g.cls))
        return out

    def dg_at(self, i: int) -> DgUnit | None:
        for u in self.dg_units:
            if u.node == i:
                return u
        return None


# ---------------------------------------------------------------------------
# loading / serialization
# ---------------------------------------------------------------------------

_TOP_KEYS = {
    "base", "dist_nodes", "dist_lines", "dg_units", "road_links",
    "ev_groups", "background_od", "cs_map", "behavior", "solver", "outages",
}


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a Scenario from a parsed document, applying defaults.

    Raises ScenarioError naming the offending field on schema violations or
    dangling references. Node and line ordering follows declared ids.
    """
    if not isinstance(doc, dict):
        raise ScenarioError("$", "document root must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ScenarioError("$", f"unknown top-level keys: {sorted(unknown)}")

    solver_doc = doc.get("solver", {})
    if not isinstance(solver_doc, dict):
        raise ScenarioError("solver", "must be an object")
    solver = SolverSettings(
        tol=float(solver_doc.get("tol", 1e-8)),
        max_iter=int(solver_doc.get("max_iter", 200)),
        horizon=int(solver_doc.get("horizon", 24)),
        charger_kw_per_vehicle=float(solver_doc.get("charger_kw_per_vehicle", 10.0)),
        q_floor=float(solver_doc.get("q_floor", 1e-12)),
    )
    horizon = solver.horizon
    if horizon < 1:
        raise ScenarioError("solver.horizon", "must be >= 1")

    try:
        s_base = float(doc["base"])
    except KeyError:
        raise ScenarioError("base", "missing required key") from None

    nodes = []
    for k, nd in enumerate(_req_list(doc, "dist_nodes")):
        locus = f"dist_nodes[{k}]"
        nid = _req_int(nd, "id", locus)
        p_load = _hourly(nd.get("p_load", 0.0), horizon, f"{locus}.p_load")
        q_load = _hourly(nd.get("q_load", 0.0), horizon, f"{locus}.q_load")
        weight = _hourly(nd.get("weight", 0.0), horizon, f"{locus}.weight")
        nodes.append(DistNode(
            id=nid,
            is_load=bool(nd.get("is_load", any(p > 0 for p in p_load))),
            is_dg=bool(nd.get("is_dg", False)),
            is_cs=bool(nd.get("is_cs", False)),
            weight=weight,
            p_load=p_load,
            q_load=q_load,
            v_min=float(nd.get("v_min", 0.95)),
            v_max=float(nd.get("v_max", 1.05)),
        ))
    nodes.sort(key=lambda n: n.id)
    node_ids = {n.id for n in nodes}
    if len(node_ids) != len(nodes):
        raise ScenarioError("dist_nodes", "duplicate node ids")

    outage_by_line: dict[int, list[tuple[int, int]]] = {}
    for k, og in enumerate(doc.get("outages", [])):
        locus = f"outages[{k}]"
        lid = _req_int(og, "line", locus)
        outage_by_line.setdefault(lid, []).append(
            (_req_int(og, "from_t", locus), _req_int(og, "to_t", locus)))

    lines = []
    for k, ld in enumerate(doc.get("dist_lines", [])):
        locus = f"dist_lines[{k}]"
        lid = _req_int(ld, "id", locus)
        fn, tn = _req_int(ld, "from", locus), _req_int(ld, "to", locus)
        for end, name in ((fn, "from"), (tn, "to")):
            if end not in node_ids:
                raise ScenarioError(f"{locus}.{name}", f"references unknown node {end}")
        lines.append(DistLine(
            id=lid, from_node=fn, to_node=tn,
            r=float(ld.get("r", 0.0)), x=float(ld.get("x", 0.0)),
            s_max=float(ld.get("s_max", 1.0)),
            outages=tuple(sorted(outage_by_line.pop(lid, []))),
        ))
    lines.sort(key=lambda l: l.id)
    if outage_by_line:
        raise ScenarioError("outages", f"reference unknown lines {sorted(outage_by_line)}")
    if len({l.id for l in lines}) != len(lines):
        raise ScenarioError("dist_lines", "duplicate line ids")

    dg_units = []
    for k, gd in enumerate(doc.get("dg_units", [])):
        locus = f"dg_units[{k}]"
        nid = _req_int(gd, "node", locus)
        if nid not in node_ids:
            raise ScenarioError(f"{locus}.node", f"references unknown node {nid}")
        dg_units.append(DgUnit(
            node=nid,
            p_min=_hourly(gd.get("p_min", 0.0), horizon, f"{locus}.p_min"),
            p_max=_hourly(gd.get("p_max", 0.0), horizon, f"{locus}.p_max"),
            cost_linear=float(gd.get("cost_linear", 0.0)),
            cost_quadratic=float(gd.get("cost_quadratic", 0.0)),
        ))
    dg_units.sort(key=lambda u: u.node)

    road_links = []
    for k, rd in enumerate(doc.get("road_links", [])):
        locus = f"road_links[{k}]"
        road_links.append(RoadLink(
            id=_req_int(rd, "id", locus),
            from_node=_req_int(rd, "from", locus),
            to_node=_req_int(rd, "to", locus),
            t0=float(rd.get("t0", 1.0)),
            capacity=float(rd.get("capacity", 1.0)),
            bpr_alpha=float(rd.get("bpr_alpha", 0.15)),
            bpr_beta=float(rd.get("bpr_beta", 4.0)),
        ))
    road_links.sort(key=lambda a: a.id)
    if len({a.id for a in road_links}) != len(road_links):
        raise ScenarioError("road_links", "duplicate link ids")

    ev_groups = []
    for k, gd in enumerate(doc.get("ev_groups", [])):
        locus = f"ev_groups[{k}]"
        ev_groups.append(EvGroup(
            origin=_req_int(gd, "origin", locus),
            cls=str(gd.get("class", k)),
            t_arrive=_req_int(gd, "arrive", locus),
            t_depart=_req_int(gd, "depart", locus),
            soc_arrive=float(gd.get("soc_arrive", 0.5)),
            soc_depart_min=float(gd.get("soc_depart_min", 0.5)),
            soc_min=float(gd.get("soc_min", 0.1)),
            soc_max=float(gd.get("soc_max", 1.0)),
            battery_kwh=float(gd.get("battery_kwh", 50.0)),
            fleet_size=float(gd.get("fleet_size", 0.0)),
            degradation_cost=float(gd.get("degradation_cost", 0.03)),
        ))
    ev_groups.sort(key=lambda g: (g.origin, g.cls))

    background = []
    for k, od in enumerate(doc.get("background_od", [])):
        locus = f"background_od[{k}]"
        dem = od.get("demand", {})
        if isinstance(dem, dict):
            pairs = tuple(sorted((int(t), float(v)) for t, v in dem.items()))
        else:
            raise ScenarioError(f"{locus}.demand", "must map arrival hour to veh/h")
        background.append(BackgroundOd(
            origin=_req_int(od, "origin", locus),
            destination=_req_int(od, "destination", locus),
            demand=pairs,
        ))
    background.sort(key=lambda od: (od.origin, od.destination))

    cs_map_doc = doc.get("cs_map", {})
    if not isinstance(cs_map_doc, dict):
        raise ScenarioError("cs_map", "must map distribution node to transport node")
    cs_map = tuple(sorted((int(i), int(s)) for i, s in cs_map_doc.items()))
    for i, _ in cs_map:
        if i not in node_ids:
            raise ScenarioError("cs_map", f"references unknown distribution node {i}")

    beh_doc = doc.get("behavior", {})
    beta0_doc = beh_doc.get("beta0", {})
    if isinstance(beta0_doc, dict):
        beta0 = tuple(sorted((int(s), float(v)) for s, v in beta0_doc.items()))
    else:
        raise ScenarioError("behavior.beta0", "must map station transport node to value")
    behavior = Behavior(
        beta1=float(beh_doc.get("beta1", 1.0)),
        beta2=float(beh_doc.get("beta2", 1.0)),
        beta0=beta0,
    )

    return Scenario(
        s_base=s_base, nodes=tuple(nodes), lines=tuple(lines),
        dg_units=tuple(dg_units), road_links=tuple(road_links),
        ev_groups=tuple(ev_groups), background_od=tuple(background),
        cs_map=cs_map, behavior=behavior, solver=solver,
    )


def load_scenario(path) -> Scenario:
    """Load and validate-parse a scenario JSON file.

    Parse errors carry the line/column locus; schema violations name the
    offending field; references to undeclared nodes/lines fail immediately.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return scenario_from_dict(doc)


def scenario_to_dict(s: Scenario) -> dict:
    """Serialize with all defaults applied; reparses to an identical Scenario."""
    return {
        "base": s.s_base,
        "dist_nodes": [
            {
                "id": n.id, "is_load": n.is_load, "is_dg": n.is_dg, "is_cs": n.is_cs,
                "weight": list(n.weight), "p_load": list(n.p_load),
                "q_load": list(n.q_load), "v_min": n.v_min, "v_max": n.v_max,
            }
            for n in s.nodes
        ],
        "dist_lines": [
            {"id": l.id, "from": l.from_node, "to": l.to_node,
             "r": l.r, "x": l.x, "s_max": l.s_max}
            for l in s.lines
        ],
        "outages": [
            {"line": l.id, "from_t": a, "to_t": b}
            for l in s.lines for a, b in l.outages
        ],
        "dg_units": [
            {"node": u.node, "p_min": list(u.p_min), "p_max": list(u.p_max),
             "cost_linear": u.cost_linear, "cost_quadratic": u.cost_quadratic}
            for u in s.dg_units
        ],
        "road_links": [
            {"id": a.id, "from": a.from_node, "to": a.to_node, "t0": a.t0,
             "capacity": a.capacity, "bpr_alpha": a.bpr_alpha, "bpr_beta": a.bpr_beta}
            for a in s.road_links
        ],
        "ev_groups": [
            {"origin": g.origin, "class": g.cls, "arrive": g.t_arrive,
             "depart": g.t_depart, "soc_arrive": g.soc_arrive,
             "soc_depart_min": g.soc_depart_min, "soc_min": g.soc_min,
             "soc_max": g.soc_max, "battery_kwh": g.battery_kwh,
             "fleet_size": g.fleet_size, "degradation_cost": g.degradation_cost}
            for g in s.ev_groups
        ],
        "background_od": [
            {"origin": od.origin, "destination": od.destination,
             "demand": {str(t): v for t, v in od.demand}}
            for od in s.background_od
        ],
        "cs_map": {str(i): t for i, t in s.cs_map},
        "behavior": {
            "beta1": s.behavior.beta1, "beta2": s.behavior.beta2,
            "beta0": {str(n): v for n, v in s.behavior.beta0},
        },
        "solver": {
            "tol": s.solver.tol, "max_iter": s.solver.max_iter,
            "horizon": s.solver.horizon,
            "charger_kw_per_vehicle": s.solver.charger_kw_per_vehicle,
            "q_floor": s.solver.q_floor,
        },
    }


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def line_status(s: Scenario, line_id: int, t: int) -> int:
    """Exogenous line status at hour ``t`` (1 in service, 0 out)."""
    if t not in s.hours:
        raise ValueError(f"hour {t} outside 1..{s.horizon}")
    return s.line(line_id).in_service(t)


def validate_scenario(s: Scenario) -> list[str]:
    """Check every structural invariant; returns violations (empty iff valid).

    Violations are data, not faults: the same scenario always yields the same
    list, in deterministic order.
    """
    v: list[str] = []
    horizon = s.horizon

    for n in s.nodes:
        if not n.v_min < n.v_max:
            v.append(f"dist_node {n.id}: voltage band empty (v_min={n.v_min} >= v_max={n.v_max})")
        if any(p < 0 for p in n.p_load):
            v.append(f"dist_node {n.id}: negative expected load")
        if any(w < 0 for w in n.weight):
            v.append(f"dist_node {n.id}: negative priority weight")
        if any(q != 0 and p == 0 for p, q in zip(n.p_load, n.q_load)):
            v.append(f"dist_node {n.id}: reactive load with zero active load (undefined power factor)")

    node_ids = {n.id for n in s.nodes}
    for l in s.lines:
        if l.r < 0 or l.x < 0:
            v.append(f"dist_line {l.id}: negative impedance")
        if l.s_max <= 0:
            v.append(f"dist_line {l.id}: non-positive capacity")
        if l.from_node not in node_ids or l.to_node not in node_ids:
            v.append(f"dist_line {l.id}: dangling endpoint")
        for a, b in l.outages:
            if not (1 <= a < b <= horizon + 1):
                v.append(f"dist_line {l.id}: outage window [{a},{b}) outside horizon")

    dg_nodes_declared = set(s.dg_nodes)
    seen_dg = set()
    for u in s.dg_units:
        if u.node in seen_dg:
            v.append(f"dg_unit at node {u.node}: duplicate unit")
        seen_dg.add(u.node)
        if u.node not in dg_nodes_declared:
            v.append(f"dg_unit at node {u.node}: node not flagged is_dg")
        if any(lo > hi for lo, hi in zip(u.p_min, u.p_max)):
            v.append(f"dg_unit at node {u.node}: p_min exceeds p_max")
        if u.cost_quadratic < 0:
            v.append(f"dg_unit at node {u.node}: concave cost (quadratic coefficient < 0)")
    for i in sorted(dg_nodes_declared - seen_dg):
        v.append(f"dist_node {i}: flagged is_dg but has no dg_unit")

    for a in s.road_links:
        if a.t0 <= 0:
            v.append(f"road_link {a.id}: non-positive free-flow time")
        if a.capacity <= 0:
            v.append(f"road_link {a.id}: non-positive capacity")
        if a.bpr_beta < 1:
            v.append(f"road_link {a.id}: bpr_beta < 1 breaks convexity of the delay integral")

    # station map must be a bijection between CS nodes and transport stations
    cs_nodes = set(s.cs_nodes)
    mapped_dist = [i for i, _ in s.cs_map]
    mapped_transport = [t for _, t in s.cs_map]
    if set(mapped_dist) != cs_nodes:
        v.append(f"cs_map: distribution side {sorted(set(mapped_dist))} != CS nodes {sorted(cs_nodes)}")
    if len(set(mapped_dist)) != len(mapped_dist) or len(set(mapped_transport)) != len(mapped_transport):
        v.append("cs_map: not a bijection (duplicate endpoint)")
    road_nodes = set(s.road_nodes)
    for t in mapped_transport:
        if s.road_links and t not in road_nodes:
            v.append(f"cs_map: transport node {t} not on the road network")

    cls_fields: dict[str, tuple] = {}
    for g in s.ev_groups:
        gid = f"ev_group ({g.origin},{g.cls})"
        if not g.t_arrive < g.t_depart:
            v.append(f"{gid}: empty dwell window (arrive={g.t_arrive} >= depart={g.t_depart})")
        if not (1 <= g.t_arrive <= horizon and 1 <= g.t_depart <= horizon):
            v.append(f"{gid}: dwell window outside horizon")
        if not g.soc_min <= g.soc_arrive <= g.soc_max:
            v.append(f"{gid}: arrival SOC outside [soc_min, soc_max]")
        if not g.soc_min <= g.soc_depart_min <= g.soc_max:
            v.append(f"{gid}: departure SOC outside [soc_min, soc_max]")
        if g.fleet_size < 0:
            v.append(f"{gid}: negative fleet size")
        if g.battery_kwh <= 0:
            v.append(f"{gid}: non-positive battery capacity")
        if g.degradation_cost < 0:
            v.append(f"{gid}: negative degradation cost")
        if s.road_links and g.origin not in road_nodes and g.fleet_size > 0:
            v.append(f"{gid}: origin not on the road network")
        key = (g.soc_depart_min, g.soc_min, g.soc_max, g.battery_kwh, g.degradation_cost)
        if g.cls in cls_fields and cls_fields[g.cls] != key:
            v.append(f"{gid}: class-level fields differ from other '{g.cls}' groups")
        cls_fields.setdefault(g.cls, key)

    for od in s.background_od:
        oid = f"background_od ({od.origin},{od.destination})"
        if any(d < 0 for _, d in od.demand):
            v.append(f"{oid}: negative demand")
        if s.road_links and (od.origin not in road_nodes or od.destination not in road_nodes):
            v.append(f"{oid}: endpoint not on the road network")
        for t, _ in od.demand:
            if t not in s.hours:
                v.append(f"{oid}: demand hour {t} outside horizon")

    if s.behavior.beta1 <= 0:
        v.append("behavior.beta1: must be > 0")
    if s.behavior.beta2 <= 0:
        v.append("behavior.beta2: must be > 0")
    if s.s_base <= 0:
        v.append("base: must be > 0")

    # feeder connectivity, ignoring outages
    if s.nodes:
        seen = {s.nodes[0].id}
        frontier = [s.nodes[0].id]
        adj: dict[int, list[int]] = {n.id: [] for n in s.nodes}
        for l in s.lines:
            if l.from_node in adj and l.to_node in adj:
                adj[l.from_node].append(l.to_node)
                adj[l.to_node].append(l.from_node)
        while frontier:
            i = frontier.pop()
            for j in adj[i]:
                if j not in seen:
                    seen.add(j)
                    frontier.append(j)
        if seen != node_ids:
            v.append(f"feeder disconnected ignoring outages: unreachable nodes {sorted(node_ids - seen)}")

    return v


def _req_list(doc: dict, key: str) -> list:
    try:
        value = doc[key]
    except KeyError:
        raise ScenarioError(key, "missing required key") from None
    if not isinstance(value, list):
        raise ScenarioError(key, "must be a list")
    return value


def _req_int(d: dict, key: str, locus: str) -> int:
    try:
        return int(d[key])
    except KeyError:
        raise ScenarioError(f"{locus}.{key}", "missing required key") from None
    except (TypeError, ValueError):
        raise ScenarioError(f"{locus}.{key}", "must be an integer") from None
