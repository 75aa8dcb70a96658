import logging
import time
from typing import Callable, Dict, List, Optional, Tuple

import store
from errors import ConfigError
from models import CheckResult, DefectValue, Report, ScenarioConfig, SurfaceSpec
from services.corpus import corpus_entry, corpus_surface, surface_from_spec
from services.lagrangian import (
    LagrangianPatch,
    build_lift,
    converse_check,
    lagrangian_defect,
    max_mean_curvature_L,
)
from services.liealg import run_lie_suite
from services.surfaces import ImmersedSurface, sweep_superminimal
from services.twistor import HermitianPack

logger = logging.getLogger(__name__)


class ScenarioContext:
    """Surface, packs and the lazily built lift shared by the checks of one scenario"""

    def __init__(self, config: ScenarioConfig, threads: Optional[int] = None):
        self.config = config
        self.threads = threads
        self.tolerances = config.merged_tolerances
        self.packs = [HermitianPack.parse(lam, sign) for lam in config.lambdas for sign in config.signs]
        self.expected: Optional[str] = None
        self._surface: Optional[ImmersedSurface] = None
        self._patch: Optional[LagrangianPatch] = None

    def resolve(self) -> None:
        """
        Parse the surface and evaluate its formulas on the whole grid now, so
        syntax and evaluation errors surface as configuration errors.
        """
        config = self.config
        if isinstance(config.surface, SurfaceSpec):
            surface = surface_from_spec(config.surface, config.model, config.grid)
            for _, _, u, v in surface.samples():
                surface.chart_map.jets(u, v)
            self._surface = surface
            return
        entry = corpus_entry(config.surface)
        if config.model is not None and config.model != entry.model:
            raise ConfigError(f"Corpus surface '{entry.name}' lives on {entry.model}, not {config.model}")
        self.expected = entry.expected
        self._surface = corpus_surface(entry.name, config.grid)

    @property
    def surface(self) -> ImmersedSurface:
        if self._surface is None:
            self.resolve()
        return self._surface

    @property
    def patch(self) -> LagrangianPatch:
        if self._patch is None:
            self._patch = build_lift(self.surface, self.config.n_theta)
        return self._patch


def _where(location) -> Optional[List]:
    return None if location is None else list(location)


def _status(defects: List[DefectValue]) -> str:
    return "pass" if all(d.passed for d in defects) else "fail"


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_superminimal(ctx: ScenarioContext) -> CheckResult:
    tol = ctx.tolerances
    result = sweep_superminimal(ctx.surface, with_holonomy=True, threads=ctx.threads)
    relaxed = tol["vertical_fd"]
    vertical_tol = tol["vertical"] if result.exact else relaxed
    indicatrix_tol = tol["indicatrix"] if result.exact else relaxed
    defects = [
        DefectValue(name="vertical", value=result.vertical[0], tolerance=vertical_tol, argmax=_where(result.vertical[1])),
        DefectValue(name="indicatrix", value=result.indicatrix[0], tolerance=indicatrix_tol, argmax=_where(result.indicatrix[1])),
        DefectValue(name="holonomy", value=result.holonomy[0], tolerance=tol["holonomy"], argmax=_where(result.holonomy[1])),
    ]
    verdicts = {
        "vertical": defects[0].passed,
        "indicatrix": defects[1].passed and not result.negative_traversal,
        "holonomy": defects[2].passed,
    }
    margin = tol["negative_margin"]
    clear_rejections = {d.name: d.value > margin for d in defects if not verdicts[d.name]}
    if result.negative_traversal:
        clear_rejections["indicatrix"] = True
    status = "pass" if all(verdicts.values()) else "fail"
    return CheckResult(
        name="superminimal",
        status=status,
        defects=defects,
        detail={
            "classification": result.classification(tol),
            "expected": ctx.expected,
            "meters": verdicts,
            "meters_agree": len(set(verdicts.values())) == 1,
            "clear_rejections": clear_rejections,
            "negative_traversal": result.negative_traversal,
            "mean_curvature": result.mean_curvature[0],
            "exact_jets": result.exact,
        },
    )


def check_lagrangian(ctx: ScenarioContext) -> CheckResult:
    tol = ctx.tolerances["lagrangian"]
    report = lagrangian_defect(ctx.patch, ctx.packs, ctx.threads)
    signs = {p.label for p in ctx.packs}
    defects = []
    if "+" in signs:
        defects.append(DefectValue(name="omega_plus", value=report.max_omega_plus, tolerance=tol, argmax=_where(report.argmax_plus)))
    if "-" in signs:
        defects.append(DefectValue(name="omega_minus", value=report.max_omega_minus, tolerance=tol, argmax=_where(report.argmax_minus)))
    defects.append(DefectValue(name="frame_metric", value=report.max_metric_defect, tolerance=tol, argmax=_where(report.argmax_metric)))
    return CheckResult(
        name="lagrangian",
        status=_status(defects),
        defects=defects,
        detail={"lambdas": list(report.lambda_list), "max_vertical_tangent": report.max_vertical, "expected": ctx.expected},
    )


def _margin(grid: Tuple[int, int]) -> int:
    return max(1, min(2, (min(grid) - 1) // 2))


def check_minimal_L(ctx: ScenarioContext) -> CheckResult:
    margin = _margin(ctx.surface.grid)
    value, where = max_mean_curvature_L(ctx.patch, ctx.packs, margin=margin, threads=ctx.threads)
    defects = [DefectValue(name="mean_curvature_L", value=value, tolerance=ctx.tolerances["minimal_l"], argmax=_where(where))]
    return CheckResult(
        name="minimal-L",
        status=_status(defects),
        defects=defects,
        detail={"fd_step": store.FD_STEP, "margin": margin, "expected": ctx.expected},
    )


def check_converse(ctx: ScenarioContext) -> CheckResult:
    report = converse_check(ctx.patch, ctx.packs, ctx.tolerances, ctx.threads)
    defects = [
        DefectValue(name=stage.name, value=stage.value, tolerance=stage.tolerance)
        for stage in report.stages
        if stage.status != "skipped"
    ]
    return CheckResult(
        name="converse",
        status="pass" if report.passed else "fail",
        defects=defects,
        detail={"stages": [{"name": s.name, "status": s.status, **s.detail} for s in report.stages]},
    )


def check_lie(ctx: ScenarioContext) -> CheckResult:
    checks = run_lie_suite(ctx.config.lambdas, ctx.tolerances["lie"])
    defects = [DefectValue(name=c.name, value=c.residual, tolerance=c.tolerance) for c in checks]
    return CheckResult(name="lie", status=_status(defects), defects=defects, detail={c.name: c.detail for c in checks})


CHECKS: Dict[str, Callable[[ScenarioContext], CheckResult]] = {
    "superminimal": check_superminimal,
    "lagrangian": check_lagrangian,
    "minimal-L": check_minimal_L,
    "converse": check_converse,
    "lie": check_lie,
}


def run_check(ctx: ScenarioContext, name: str) -> CheckResult:
    started = time.perf_counter()
    try:
        result = CHECKS[name](ctx)
    except Exception as e:
        logger.error(f"[{name.upper()}] check failed to run: {e}")
        result = CheckResult(name=name, status="error", error=f"{type(e).__name__}: {e}")
    return result.model_copy(update={"elapsed_seconds": time.perf_counter() - started})


def run_scenario(config: ScenarioConfig, threads: Optional[int] = None) -> Report:
    """
    Run the requested checks in fixed order. Unknown surfaces and formulas that
    fail to parse or to evaluate on the grid raise before any check runs;
    failures inside a check are recorded on it.
    """
    started = time.perf_counter()
    ctx = ScenarioContext(config, threads)
    if config.ordered_checks != ["lie"]:
        ctx.resolve()
    results = [run_check(ctx, name) for name in config.ordered_checks]
    statuses = {r.status for r in results}
    status = "error" if "error" in statuses else ("fail" if "fail" in statuses else "pass")
    logger.info(f"[CONFIG] scenario finished: {status}")
    return Report(
        status=status,
        config=config.model_dump(mode="json"),
        checks=results,
        elapsed_seconds=time.perf_counter() - started,
    )
