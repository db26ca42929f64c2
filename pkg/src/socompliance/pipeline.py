"""End-to-end run: UE and SO assignment, reduced-cost sets, max UE share, report."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

from . import __version__
from .assignment import DEFAULT_AEC, SO, UE, EquilibriumSolution, solve_equilibrium
from .compliance import ComplianceResult, check_sufficiency, max_ue_share
from .network import NetworkModel
from .reduced_cost import DEFAULT_TOLERANCE, EXACT, ReducedCostSets, reduced_cost_sets
from .report import Report

log = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


@dataclass(frozen=True)
class PipelineOptions:
    aec_target: float = DEFAULT_AEC
    max_iterations: int = 2000
    rc_mode: str = EXACT
    rc_tolerance: float = DEFAULT_TOLERANCE
    seed: int | None = None
    threads: int = 1
    export_lp_dir: str | None = None
    solve_ue: bool = True

    def __post_init__(self):
        if self.aec_target <= 0 or self.rc_tolerance < 0 or self.threads < 1 or self.max_iterations < 1:
            raise ValueError("aec_target, threads and max_iterations must be positive, rc_tolerance >= 0")


@dataclass(frozen=True, eq=False)
class PipelineResult:
    options: PipelineOptions
    ue: EquilibriumSolution | None
    so: EquilibriumSolution
    rc: ReducedCostSets
    compliance: ComplianceResult

    @property
    def converged(self) -> bool:
        return self.so.converged and (self.ue is None or self.ue.converged)

    @property
    def percent_improve(self) -> float | None:
        if self.ue is None or self.ue.total_travel_time <= 0:
            return None
        return 100.0 * (self.ue.total_travel_time - self.so.total_travel_time) / self.ue.total_travel_time


def _stage(name, fn, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return fn(*args, **kwargs)
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage attached
        raise PipelineError(name, exc) from exc


def solve_so(model: NetworkModel, options: PipelineOptions) -> EquilibriumSolution:
    return _stage("so", solve_equilibrium, model, SO, options.aec_target, options.max_iterations,
                  seed=options.seed)


def run_pipeline(model: NetworkModel, options: PipelineOptions = PipelineOptions()) -> PipelineResult:
    """SO solve, f_bar, reduced-cost sets, UE LP, compliant LP and decomposition."""
    ue = None
    if options.solve_ue:
        ue = _stage("ue", solve_equilibrium, model, UE, options.aec_target, options.max_iterations,
                    seed=options.seed)
    so = solve_so(model, options)
    rc = _stage("reduced_cost", reduced_cost_sets, model, so, options.rc_mode, options.rc_tolerance,
                threads=options.threads)
    result = _stage("compliance", max_ue_share, model, so, rc, export_dir=options.export_lp_dir)
    return PipelineResult(options, ue, so, rc, result)


def run_check(model: NetworkModel, compliant_demand: dict, options: PipelineOptions = PipelineOptions()):
    """SO solve, reduced-cost sets and the sufficiency test for ``compliant_demand``."""
    so = solve_so(model, options)
    rc = _stage("reduced_cost", reduced_cost_sets, model, so, options.rc_mode, options.rc_tolerance,
                threads=options.threads)
    verdict = _stage("sufficiency", check_sufficiency, model, so, rc, compliant_demand)
    return so, rc, verdict


# ---------------------------------------------------------------- reports

def _pair(model, s, t):
    return model.node_ids[s], model.node_ids[t]


def _path_rows(model, paths):
    return [[*_pair(model, s, t), v, " ".join(str(e + 1) for e in p)] for s, t, p, v in paths]


def header(command: str, config: dict) -> Report:
    rep = Report()
    rep.section("header", {"tool": "socompliance", "version": __version__, "command": command})
    rep.section("config", config)
    return rep


def equilibrium_section(rep: Report, sol: EquilibriumSolution, label: str) -> None:
    rep.section(label, {"mode": sol.mode, "total_travel_time": sol.total_travel_time, "aec": sol.aec,
                        "iterations": sol.iterations, "converged": sol.converged,
                        "used_paths": len(sol.path_flows)})


def options_echo(options: PipelineOptions) -> dict:
    return {k: v for k, v in asdict(options).items() if k != "solve_ue"}


def pipeline_report(model: NetworkModel, res: PipelineResult, config: dict, paths: bool = True) -> Report:
    rep = header("max-ue", config)
    rep.section("network", {"fingerprint": model.fingerprint(), "nodes": model.n_nodes, "links": model.n_links,
                            "zones": len(model.zones), "od_pairs": len(model.demand),
                            "total_demand": model.total_demand})
    if res.ue is not None:
        equilibrium_section(rep, res.ue, "ue")
    equilibrium_section(rep, res.so, "so")
    rc = res.rc
    rep.section("reduced_cost", {"mode": rc.mode, "tolerance": rc.tolerance if rc.mode == EXACT else None, "threshold_T": rc.threshold_T,
                                 "certified_links": rc.stats["links_total"],
                                 "disconnected_pairs": len(rc.disconnected_pairs)})
    c = res.compliance
    rep.section("compliance", {
        "r_ue_total": c.r_ue_total,
        "percent_compliant": c.percent_compliant,
        "ue_lp_bound": c.ue_lp_bound,
        "percent_compliant_ue_lp": 100.0 * c.ue_lp_compliant_fraction,
        "method": c.method,
        "cancelled_cycles": len(c.cycles),
        "ue_paths": len(c.ue_paths),
        "compliant_paths": len(c.compliant_paths),
        **{k: v for k, v in sorted(c.lp_stats.items())},
        "note": "per-pair split of an optimal LP vertex; other optimal splits may exist",
    })
    summary = {"ue_ttt": res.ue.total_travel_time if res.ue is not None else None,
               "so_ttt": res.so.total_travel_time, "percent_improve": res.percent_improve,
               "percent_compliant": c.percent_compliant,
               "percent_compliant_ue_lp": 100.0 * c.ue_lp_compliant_fraction}
    rep.section("summary", summary)
    disconnected = set(c.disconnected_pairs)
    rows = [[*_pair(model, s, t), R, c.r_ue[(s, t)], c.compliant_demand[(s, t)], (s, t) in disconnected]
            for (s, t), R in model.demand.items()]
    rep.table("od_shares", ["origin", "dest", "demand", "r_ue", "compliant", "rc_disconnected"], rows)
    rep.table("rc_links", ["origin", "links"],
              [[model.node_ids[s], " ".join(str(e + 1) for e in sorted(rc.links(s)))] for s in model.origins])
    if paths:
        rep.table("ue_paths", ["origin", "dest", "volume", "links"], _path_rows(model, c.ue_paths))
        rep.table("compliant_paths", ["origin", "dest", "volume", "links"], _path_rows(model, c.compliant_paths))
    return rep
