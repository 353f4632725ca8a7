"""Result tables and persistence.

Six CSV tables mirror the study outputs (served load, station injections,
prices, incentives, vehicle flows, SOC trajectories); scalar metrics live in
``solution.json`` together with the full primal/dual bundle, the embedded
scenario, and the certification report, so a solution file is
self-contained and re-checkable. CSV output is deterministic: fixed column
order, 9-significant-digit decimals, and newline-terminated rows, so two
runs on identical input are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .equilibrium import CheckResult, EquilibriumReport
from .fleet import station_injection_series, vn_soc, window_hours
from .model import Scenario, scenario_from_dict, scenario_to_dict
from .power import served_load_metrics, vn_pd
from .program import SolutionBundle, duality_gap
from .traffic import vn_q

EXPORT_FLUSH = 1e-9          # vehicle flows below this are reported as zero


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        if x == 0.0:
            return "0"
        return f"{x:.9g}"
    return str(x)


@dataclass
class ResultsTables:
    """Row-oriented tables, units in the headers."""

    load_served: list[tuple]        # node, hour, expected_pu, served_pu
    station_power: list[tuple]      # node, hour, injection_pu
    prices: list[tuple]             # node, hour, price_usd_per_puh
    incentives: list[tuple]         # origin, station, class, incentive_usd_per_veh
    ev_flows: list[tuple]           # origin, station, class, vehicles
    soc: list[tuple]                # origin, class, hour, soc_vehicle_sum
    metrics: dict


_HEADERS = {
    "load_served": ("node", "hour", "expected_pu", "served_pu"),
    "station_power": ("node", "hour", "injection_pu"),
    "prices": ("node", "hour", "price_usd_per_puh"),
    "incentives": ("origin", "station", "class", "incentive_usd_per_veh"),
    "ev_flows": ("origin", "station", "class", "vehicles"),
    "soc": ("origin", "class", "hour", "soc_vehicle_sum"),
}


def build_results(s: Scenario, b: SolutionBundle, report: EquilibriumReport) -> ResultsTables:
    """Assemble every output table from a solved, certified bundle."""
    load = served_load_metrics(b, s)
    load_served = [
        (n.id, t, n.p_load[t - 1], b.value(vn_pd(n.id, t)))
        for n in s.nodes for t in s.hours
    ]
    station_power = [
        (i, t, inj[t - 1])
        for i, inj in sorted(station_injection_series(b, s).items())
        for t in s.hours
    ]
    prices = [(i, t, report.prices[(i, t)]) for i in s.supply_nodes for t in s.hours]
    incentives = [
        (r, st, e, report.incentives[(r, st, e)]) for r, st, e in s.od_triples
    ]
    ev_flows = []
    for r, st, e in s.od_triples:
        q = b.value(vn_q(r, st, e))
        ev_flows.append((r, st, e, 0.0 if abs(q) < EXPORT_FLUSH else q))
    soc = [
        (g.origin, g.cls, t, b.value(vn_soc(g.origin, g.cls, t)))
        for g in s.ev_groups if g.fleet_size > 0
        for t in window_hours(g)
    ]
    metrics = {
        "status": b.status,
        "total_load_loss_puh": load["total_load_loss"],
        "weighted_served_usd": load["weighted_served"],
        "objective_usd": b.objective_primal,
        "duality_gap": duality_gap(b),
        "solve_time_s": b.solve_time,
        "iterations": b.iterations,
        "verified": report.passed,
    }
    return ResultsTables(load_served, station_power, prices, incentives,
                         ev_flows, soc, metrics)


def write_tables(tables: ResultsTables, out_dir) -> list[Path]:
    """Write the six CSV tables; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, header in _HEADERS.items():
        path = out / f"{name}.csv"
        rows = getattr(tables, name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# solution.json
# ---------------------------------------------------------------------------

def _report_to_dict(report: EquilibriumReport) -> dict:
    return {
        "prices": [[i, t, v] for (i, t), v in sorted(report.prices.items())],
        "incentives": [[r, st, e, v] for (r, st, e), v in sorted(report.incentives.items())],
        "travel_times": [[tau, r, st, v]
                         for (tau, r, st), v in sorted(report.travel_times.items())],
        "checks": [
            {"name": c.name, "residual": c.residual,
             "tolerance": c.tolerance, "passed": c.passed}
            for c in report.checks
        ],
        "degenerate": report.degenerate,
        "passed": report.passed,
    }


def _report_from_dict(doc: dict) -> EquilibriumReport:
    return EquilibriumReport(
        prices={(int(i), int(t)): float(v) for i, t, v in doc["prices"]},
        incentives={(int(r), int(st), str(e)): float(v)
                    for r, st, e, v in doc["incentives"]},
        travel_times={(int(tau), int(r), int(st)): float(v)
                      for tau, r, st, v in doc["travel_times"]},
        checks=tuple(
            CheckResult(c["name"], float(c["residual"]), float(c["tolerance"]))
            for c in doc["checks"]
        ),
        degenerate=doc.get("degenerate"),
    )


def write_solution(path, s: Scenario, b: SolutionBundle,
                   report: EquilibriumReport, metrics: dict) -> None:
    doc = {
        "scenario": scenario_to_dict(s),
        "status": b.status,
        "objective_primal": b.objective_primal,
        "objective_dual": b.objective_dual,
        "duality_gap": duality_gap(b),
        "iterations": b.iterations,
        "solve_time_s": b.solve_time,
        "feasibility_residual": b.feasibility_residual,
        "variables": {name: float(b.x[j]) for name, j in b.var_index.items()},
        "duals": {name: float(v) for name, v in b.duals.items()},
        "metrics": metrics,
        "report": _report_to_dict(report),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_solution(path) -> tuple[Scenario, SolutionBundle, EquilibriumReport, dict]:
    """Load a solution file back into scenario, bundle, report, and metrics.

    The bundle's variable order is reconstructed from the embedded names;
    callers re-assembling the program should assert the orders agree.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("scenario", "variables", "duals", "report", "status"):
        if key not in doc:
            raise ValueError(f"solution file missing {key!r}")
    s = scenario_from_dict(doc["scenario"])
    names = list(doc["variables"].keys())
    x = np.array([float(doc["variables"][nm]) for nm in names])
    b = SolutionBundle(
        status=doc["status"],
        x=x,
        var_index={nm: j for j, nm in enumerate(names)},
        duals={nm: float(v) for nm, v in doc["duals"].items()},
        objective_primal=float(doc["objective_primal"]),
        objective_dual=float(doc["objective_dual"]),
        iterations=int(doc["iterations"]),
        solve_time=float(doc["solve_time_s"]),
        feasibility_residual=float(doc["feasibility_residual"]),
    )
    return s, b, _report_from_dict(doc["report"]), doc.get("metrics", {})
