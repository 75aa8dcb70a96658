"""
The circle bundle L over a surface: over each surface point the fiber circle
of complex structures carrying the tangent plane onto the normal plane.

In the reference-frame coordinates of the fiber sphere the circle is spanned
by c2 and c3, where c1, c2, c3 are the triple coordinates of J0 and of the two
basic equator structures of the adapted frame, so
j(u, v, theta) = cos(theta) c2 + sin(theta) c3.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cholesky, null_space, solve_triangular

import store
from errors import RankDeficientError, TwistorKitError
from services.geometry import ManifoldModel, metric_at, reference_frame
from services.surfaces import (
    CallableMap,
    Domain,
    ImmersedSurface,
    adapted_frame,
    sweep_superminimal,
)
from services.twistor import (
    CONNECTION_RATIO,
    TRIPLE,
    FiberChart,
    HermitianPack,
    TwistorLocal,
    TwistorPoint,
    TwistorTangent,
    chart_christoffel,
    chart_metric,
    fiber_rotations,
    triple_coordinates,
    twistor_local,
)
from utils.numerics import numerical_rank, operator_norm, running_max, second_differences, sweep

logger = logging.getLogger(__name__)

POLE_STEP = 1e-5
POLE_STEP_RELAXED = 1e-4
DEGENERATE_TANGENT = 1e-8
# Christoffel stencil relative to the lift stencil h
CHRISTOFFEL_RATIO = 0.5


def pole_coordinates(s: ImmersedSurface, u: float, v: float) -> np.ndarray:
    """Rows c1, c2, c3: the adapted triple seen from the reference frame"""
    x = s.point(u, v)
    frame = adapted_frame(s, u, v)
    g = metric_at(s.model, x)
    q = reference_frame(s.model, x).T @ g @ frame.matrix
    return np.stack([triple_coordinates(q @ J @ q.T) for J in TRIPLE])


@dataclass(frozen=True)
class _BaseSample:
    x: np.ndarray
    xu: np.ndarray
    xv: np.ndarray
    coefficients: np.ndarray
    poles: np.ndarray
    poles_u: np.ndarray
    poles_v: np.ndarray
    rotations: np.ndarray


@dataclass(frozen=True)
class LagrangianPatch:
    surface: ImmersedSurface
    n_theta: int = store.DEFAULT_N_THETA
    _cache: Dict[Tuple[float, float], _BaseSample] = field(default_factory=dict, compare=False, repr=False)

    @property
    def model(self) -> ManifoldModel:
        return self.surface.model

    @property
    def theta_values(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_theta) / self.n_theta

    def samples(self) -> List[Tuple[Tuple[int, int, int], float, float, float]]:
        return [
            ((i, j, k), u, v, float(theta))
            for i, j, u, v in self.surface.samples()
            for k, theta in enumerate(self.theta_values)
        ]

    def base_sample(self, u: float, v: float) -> _BaseSample:
        key = (float(u), float(v))
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if not self.surface.domain.contains(u, v):
            raise ValueError(f"Sample ({u}, {v}) is outside the surface domain")
        s = self.surface
        h = POLE_STEP if s.exact else POLE_STEP_RELAXED
        jets = s.jets(u, v)
        sample = _BaseSample(
            x=jets.x,
            xu=jets.xu,
            xv=jets.xv,
            coefficients=adapted_frame(s, u, v, jets).coefficients,
            poles=pole_coordinates(s, u, v),
            poles_u=(pole_coordinates(s, u + h, v) - pole_coordinates(s, u - h, v)) / (2 * h),
            poles_v=(pole_coordinates(s, u, v + h) - pole_coordinates(s, u, v - h)) / (2 * h),
            rotations=fiber_rotations(s.model, jets.x),
        )
        self._cache[key] = sample
        return sample

    def fiber_j(self, u: float, v: float, theta: float) -> np.ndarray:
        c = pole_coordinates(self.surface, u, v)
        return np.cos(theta) * c[1] + np.sin(theta) * c[2]

    def point(self, params: Sequence[float]) -> TwistorPoint:
        u, v, theta = map(float, params)
        return TwistorPoint(base=self.surface.point(u, v), fiber=self.fiber_j(u, v, theta))

    def parameter_box(self) -> Tuple[Tuple[float, float], ...]:
        d = self.surface.domain
        return (d.u0, d.u1), (d.v0, d.v1), (0.0, 2.0 * np.pi)

    def parameter_samples(self) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
        return [(index, np.array([u, v, theta])) for index, u, v, theta in self.samples()]

    @property
    def projection_grid(self) -> Tuple[int, int]:
        return self.surface.grid

    @property
    def fd_step(self) -> float:
        return POLE_STEP if self.surface.exact else POLE_STEP_RELAXED


def build_lift(s: ImmersedSurface, n_theta: int = store.DEFAULT_N_THETA) -> LagrangianPatch:
    if n_theta < 3:
        raise ValueError(f"n_theta must be at least 3, got {n_theta}")
    patch = LagrangianPatch(surface=s, n_theta=n_theta)
    # touches every base sample so degeneracy surfaces here
    for _, _, u, v in s.samples():
        patch.base_sample(u, v)
    logger.info(f"[LAGRANGIAN] built lift of {s.name} on {s.grid[0]}x{s.grid[1]}x{n_theta}")
    return patch


def lift_point(patch: LagrangianPatch, u: float, v: float, theta: float) -> TwistorPoint:
    sample = patch.base_sample(u, v)
    j = np.cos(theta) * sample.poles[1] + np.sin(theta) * sample.poles[2]
    return TwistorPoint(base=sample.x, fiber=j)


def _local(patch: LagrangianPatch, u: float, v: float, theta: float) -> TwistorLocal:
    sample = patch.base_sample(u, v)
    return twistor_local(patch.model, lift_point(patch, u, v, theta), rotations=sample.rotations)


def chart_tangents(patch: LagrangianPatch, u: float, v: float, theta: float) -> Tuple[TwistorTangent, TwistorTangent, TwistorTangent]:
    """Derivatives of (u, v, theta) -> (x, j) along each parameter"""
    sample = patch.base_sample(u, v)
    c, s_ = np.cos(theta), np.sin(theta)
    d_u = TwistorTangent(dx=sample.xu, dj=c * sample.poles_u[1] + s_ * sample.poles_u[2])
    d_v = TwistorTangent(dx=sample.xv, dj=c * sample.poles_v[1] + s_ * sample.poles_v[2])
    d_theta = TwistorTangent(dx=np.zeros(4), dj=-s_ * sample.poles[1] + c * sample.poles[2])
    return d_u, d_v, d_theta


def _combine(a: float, V: TwistorTangent, b: float, W: TwistorTangent) -> TwistorTangent:
    return TwistorTangent(dx=a * np.asarray(V.dx) + b * np.asarray(W.dx), dj=a * np.asarray(V.dj) + b * np.asarray(W.dj))


def tangent_frame_L(patch: LagrangianPatch, u: float, v: float, theta: float, lam: float = 1.0,
                    local: Optional[TwistorLocal] = None) -> Tuple[TwistorTangent, TwistorTangent, TwistorTangent]:
    """
    v3 = lam * d_theta is vertical of unit length; v1, v2 are the chart
    derivatives along e1, e2 with their component along v3 removed.
    """
    local = local or _local(patch, u, v, theta)
    sample = patch.base_sample(u, v)
    d_u, d_v, d_theta = chart_tangents(patch, u, v, theta)
    v3 = TwistorTangent(dx=np.zeros(4), dj=lam * np.asarray(d_theta.dj))
    frame = []
    for i in range(2):
        a, b = sample.coefficients[:, i]
        raw = _combine(a, d_u, b, d_v)
        along = local.g_lambda(lam, raw, v3)
        frame.append(_combine(1.0, raw, -along, v3))
    return frame[0], frame[1], v3


def vertical_size(local: TwistorLocal, V: TwistorTangent) -> float:
    return float(np.linalg.norm(local.vertical_part(V)))


# ---------------------------------------------------------------------------
# Lagrangian defects
# ---------------------------------------------------------------------------

def _orthonormalize(local: TwistorLocal, lam: float, vectors: Sequence[TwistorTangent], tol: float = DEGENERATE_TANGENT) -> List[TwistorTangent]:
    basis: List[TwistorTangent] = []
    for V in vectors:
        w = V
        for b in basis:
            w = _combine(1.0, w, -local.g_lambda(lam, b, w), b)
        norm = np.sqrt(max(local.g_lambda(lam, w, w), 0.0))
        if norm <= tol:
            continue
        basis.append(_combine(1.0 / norm, w, 0.0, w))
    return basis


def _omega_max(local: TwistorLocal, pack: HermitianPack, basis: Sequence[TwistorTangent]) -> float:
    worst = 0.0
    for a in range(len(basis)):
        for b in range(a + 1, len(basis)):
            horizontal, vertical = local.kahler_split(pack, basis[a], basis[b])
            worst = max(worst, abs(horizontal + vertical))
    return worst


def _metric_defect(local: TwistorLocal, lam: float, frame: Sequence[TwistorTangent]) -> float:
    worst = 0.0
    for a in range(3):
        for b in range(3):
            worst = max(worst, abs(local.g_lambda(lam, frame[a], frame[b]) - (1.0 if a == b else 0.0)))
    return worst


@dataclass(frozen=True)
class DefectReport:
    max_omega_plus: float
    max_omega_minus: float
    max_metric_defect: float
    argmax_plus: Optional[Tuple]
    argmax_minus: Optional[Tuple]
    argmax_metric: Optional[Tuple]
    lambda_list: Tuple[float, ...]
    max_vertical: float = 0.0

    @property
    def max_defect(self) -> float:
        return max(self.max_omega_plus, self.max_omega_minus)

    @property
    def argmax(self) -> Optional[Tuple]:
        return self.argmax_plus if self.max_omega_plus >= self.max_omega_minus else self.argmax_minus


def _as_packs(packs: Union[HermitianPack, Iterable[HermitianPack]]) -> List[HermitianPack]:
    if isinstance(packs, HermitianPack):
        return [packs]
    return list(packs)


def all_packs(lambdas: Sequence[float] = store.DEFAULT_LAMBDAS, signs: Sequence[str] = store.DEFAULT_SIGNS) -> List[HermitianPack]:
    return [HermitianPack.parse(lam, sign) for lam in lambdas for sign in signs]


def lagrangian_defect(patch: LagrangianPatch, packs: Union[HermitianPack, Iterable[HermitianPack]],
                      threads: Optional[int] = None) -> DefectReport:
    """
    Largest |omega_+-(v_i, v_j)| over every sample, frame pair and swept pack,
    with the frame Gram-Schmidt normalized in g_lambda.
    """
    packs = _as_packs(packs)
    lambdas = tuple(sorted({p.lam for p in packs}))

    def per_sample(item):
        index, u, v, theta = item
        local = _local(patch, u, v, theta)
        rows = []
        for lam in lambdas:
            frame = tangent_frame_L(patch, u, v, theta, lam, local)
            basis = _orthonormalize(local, lam, frame)
            metric = _metric_defect(local, lam, frame)
            vertical = max(vertical_size(local, frame[0]), vertical_size(local, frame[1]))
            for pack in packs:
                if pack.lam == lam:
                    rows.append((pack.sign, lam, _omega_max(local, pack, basis), metric, vertical))
        return index, rows

    results = sweep(per_sample, patch.samples(), threads)
    plus = running_max((d, index + (lam,)) for index, rows in results for sign, lam, d, _, _ in rows if sign > 0)
    minus = running_max((d, index + (lam,)) for index, rows in results for sign, lam, d, _, _ in rows if sign < 0)
    metric = running_max((m, index + (lam,)) for index, rows in results for _, lam, _, m, _ in rows)
    vertical = running_max((w, index) for index, rows in results for _, _, _, _, w in rows)
    report = DefectReport(
        max_omega_plus=plus[0],
        max_omega_minus=minus[0],
        max_metric_defect=metric[0],
        argmax_plus=plus[1],
        argmax_minus=minus[1],
        argmax_metric=metric[1],
        lambda_list=lambdas,
        max_vertical=vertical[0],
    )
    logger.info(
        f"[LAGRANGIAN] {patch.surface.name}: omega+={report.max_omega_plus:.3e} "
        f"omega-={report.max_omega_minus:.3e} metric={report.max_metric_defect:.3e}"
    )
    return report


# ---------------------------------------------------------------------------
# Mean curvature of the lift in (Z, g_lambda)
# ---------------------------------------------------------------------------

def _lift_chart(patch: LagrangianPatch, chart: FiberChart):
    def y(params: np.ndarray) -> np.ndarray:
        u, v, theta = params
        return np.concatenate([patch.surface.point(u, v), chart.from_sphere(patch.fiber_j(u, v, theta))])
    return y


def _normal_curvature(patch: LagrangianPatch, pack: HermitianPack, u: float, v: float, theta: float,
                      h: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Components of sum gamma^ab (Y_ab + Gamma(Y_a, Y_b)) along a g_lambda-
    orthonormal normal frame (6x3) of the lift in the (x, zeta) chart.
    """
    h = h or store.FD_STEP
    domain = patch.surface.domain
    if not (domain.contains(u - h, v - h, 0.0) and domain.contains(u + h, v + h, 0.0)):
        raise ValueError(f"Sample ({u}, {v}) is too close to the domain edge for step {h}")
    centre = np.array([u, v, theta], dtype=float)
    chart = FiberChart.choose(patch.fiber_j(u, v, theta))
    y = _lift_chart(patch, chart)
    first, second = second_differences(y, centre, h)
    y0 = y(centre)
    inner_step = h * CHRISTOFFEL_RATIO
    g = chart_metric(patch.model, chart, y0, pack.lam, inner_step * CONNECTION_RATIO)
    gamma = chart_christoffel(patch.model, chart, y0, pack.lam, inner_step)
    tangents = first.T  # 6x3
    induced = tangents.T @ g @ tangents
    inverse = np.linalg.inv(induced)
    acceleration = second + np.einsum("kij,ai,bj->abk", gamma, first, first)
    vector = np.einsum("ab,abk->k", inverse, acceleration)
    normals = null_space(tangents.T @ g)
    if normals.shape[1] != 3:
        raise RankDeficientError(f"Lift chart is not immersed at ({u}, {v}, {theta})")
    lower = cholesky(normals.T @ g @ normals, lower=True)
    normals = solve_triangular(lower, normals.T, lower=True).T
    return normals.T @ g @ vector, normals


def mean_curvature_vector_L(patch: LagrangianPatch, pack: HermitianPack, u: float, v: float, theta: float,
                            h: Optional[float] = None) -> np.ndarray:
    """Mean curvature vector of the lift as a (x, zeta) chart vector"""
    components, normals = _normal_curvature(patch, pack, u, v, theta, h)
    return normals @ components


def mean_curvature_L(patch: LagrangianPatch, pack: HermitianPack, u: float, v: float, theta: float,
                     h: Optional[float] = None) -> np.ndarray:
    """Mean curvature components in a g_lambda-orthonormal normal frame of the lift"""
    return _normal_curvature(patch, pack, u, v, theta, h)[0]


def interior_samples(patch: LagrangianPatch, margin: int = 2) -> List[Tuple[Tuple[int, int, int], float, float, float]]:
    n_u, n_v = patch.surface.grid
    return [
        item for item in patch.samples()
        if margin <= item[0][0] < n_u - margin and margin <= item[0][1] < n_v - margin
    ]


def max_mean_curvature_L(patch: LagrangianPatch, packs: Union[HermitianPack, Iterable[HermitianPack]],
                         margin: int = 2, threads: Optional[int] = None) -> Tuple[float, Optional[Tuple]]:
    lambdas = sorted({p.lam for p in _as_packs(packs)})
    items = [(item, lam) for item in interior_samples(patch, margin) for lam in lambdas]
    if not items:
        raise ValueError(f"Grid {patch.surface.grid} has no samples {margin} cells away from the edge")

    def per_item(entry):
        (index, u, v, theta), lam = entry
        value = float(np.linalg.norm(mean_curvature_L(patch, HermitianPack(lam), u, v, theta)))
        return value, index + (lam,)

    worst = running_max(sweep(per_item, items, threads))
    logger.info(f"[MINIMAL-L] {patch.surface.name}: max |H| = {worst[0]:.3e} at {worst[1]}")
    return worst


# ---------------------------------------------------------------------------
# Converse direction
# ---------------------------------------------------------------------------

class TwistorChart(Protocol):
    """A 3-parameter chart of Z offered to the converse check"""

    @property
    def model(self) -> ManifoldModel: ...

    @property
    def fd_step(self) -> float: ...

    @property
    def projection_grid(self) -> Tuple[int, int]: ...

    def point(self, params: Sequence[float]) -> TwistorPoint: ...

    def parameter_box(self) -> Tuple[Tuple[float, float], ...]: ...

    def parameter_samples(self) -> List[Tuple[Tuple[int, ...], np.ndarray]]: ...


def _box_samples(box: Sequence[Tuple[float, float]], count: int) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
    axes = [np.linspace(lo, hi, count) for lo, hi in box]
    return [
        ((i, j, k), np.array([axes[0][i], axes[1][j], axes[2][k]]))
        for i in range(count) for j in range(count) for k in range(count)
    ]


@dataclass(frozen=True)
class FiberCircleChart:
    """Degenerate chart: a fixed base point, j turning along one great circle by a + b + c"""
    model: ManifoldModel
    base: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    span: float = 1.0
    count: int = 4
    fd_step: float = 1e-5

    @property
    def projection_grid(self) -> Tuple[int, int]:
        return self.count, self.count

    def point(self, params: Sequence[float]) -> TwistorPoint:
        angle = float(np.sum(params))
        return TwistorPoint(base=np.array(self.base, dtype=float), fiber=np.array([0.0, np.cos(angle), np.sin(angle)]))

    def parameter_box(self) -> Tuple[Tuple[float, float], ...]:
        return ((0.0, self.span),) * 3

    def parameter_samples(self) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
        return _box_samples(self.parameter_box(), self.count)


@dataclass(frozen=True)
class CallableTwistorChart:
    """Any params -> (x, j) map over a parameter box"""
    model: ManifoldModel
    func: object
    box: Tuple[Tuple[float, float], ...]
    count: int = 4
    fd_step: float = 1e-5

    @property
    def projection_grid(self) -> Tuple[int, int]:
        return self.count, self.count

    def point(self, params: Sequence[float]) -> TwistorPoint:
        x, j = self.func(np.asarray(params, dtype=float))
        j = np.asarray(j, dtype=float)
        return TwistorPoint(base=np.asarray(x, dtype=float), fiber=j / np.linalg.norm(j))

    def parameter_box(self) -> Tuple[Tuple[float, float], ...]:
        return self.box

    def parameter_samples(self) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
        return _box_samples(self.box, self.count)


@dataclass(frozen=True)
class ConverseStage:
    name: str
    status: str  # pass, fail, skipped
    value: Optional[float] = None
    tolerance: Optional[float] = None
    detail: Dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class ConverseReport:
    stages: Tuple[ConverseStage, ...]

    @property
    def passed(self) -> bool:
        return all(stage.status == "pass" for stage in self.stages)

    def stage(self, name: str) -> ConverseStage:
        for stage in self.stages:
            if stage.name == name:
                return stage
        raise KeyError(name)


def _fd_tangents(candidate: TwistorChart, params: np.ndarray) -> List[TwistorTangent]:
    h = candidate.fd_step
    tangents = []
    for a in range(len(params)):
        step = np.zeros_like(params)
        step[a] = h
        plus, minus = candidate.point(params + step), candidate.point(params - step)
        tangents.append(TwistorTangent(dx=(plus.base - minus.base) / (2 * h), dj=(plus.fiber - minus.fiber) / (2 * h)))
    return tangents


def _orthonormal_coords(metric: np.ndarray) -> np.ndarray:
    """Upper Cholesky factor R with g = R^T R; R maps chart vectors to orthonormal coordinates"""
    return cholesky(metric, lower=False)


def _projected_pair(candidate: TwistorChart) -> Tuple[int, int]:
    centre = np.array([0.5 * (lo + hi) for lo, hi in candidate.parameter_box()])
    tangents = _fd_tangents(candidate, centre)
    r = _orthonormal_coords(metric_at(candidate.model, candidate.point(centre).base))
    best, best_pair = -1.0, (0, 1)
    for pair in ((0, 1), (0, 2), (1, 2)):
        minor = np.column_stack([r @ tangents[a].dx for a in pair])
        smallest = float(np.linalg.svd(minor, compute_uv=False)[-1])
        if smallest > best:
            best, best_pair = smallest, pair
    return best_pair


def _projection_surface(candidate: TwistorChart, pair: Tuple[int, int], swap: bool = False) -> ImmersedSurface:
    box = candidate.parameter_box()
    centre = np.array([0.5 * (lo + hi) for lo, hi in box])
    first, second = (pair[1], pair[0]) if swap else pair

    def func(a: float, b: float) -> np.ndarray:
        params = centre.copy()
        params[first], params[second] = a, b
        return candidate.point(params).base

    domain = Domain(box[first][0], box[first][1], box[second][0], box[second][1])
    return ImmersedSurface(candidate.model, CallableMap(func), domain, candidate.projection_grid, name="projection")


def converse_check(candidate: TwistorChart, packs: Union[HermitianPack, Iterable[HermitianPack]],
                   tolerances: Optional[Dict[str, float]] = None, threads: Optional[int] = None) -> ConverseReport:
    """
    Stages: lagrangian (both signs on the span of the chart tangents), rank
    (projected differential has rank 2), superminimal (projection passes the
    relaxed meters for one orientation), containment (each J carries the
    projected tangent plane onto its normal plane).
    """
    tol = store.merged_tolerances(tolerances)
    packs = _as_packs(packs)
    samples = candidate.parameter_samples()
    stages: List[ConverseStage] = []

    def per_sample(item):
        index, params = item
        tp = candidate.point(params)
        local = twistor_local(candidate.model, tp)
        tangents = _fd_tangents(candidate, params)
        rows = []
        rank = 3
        for pack in packs:
            basis = _orthonormalize(local, pack.lam, tangents)
            rank = min(rank, len(basis))
            rows.append(_omega_max(local, pack, basis))
        r = _orthonormal_coords(local.metric)
        projected = np.column_stack([r @ t.dx for t in tangents])
        return index, max(rows), rank, numerical_rank(projected), projected, r @ local.J @ np.linalg.inv(r)

    results = sweep(per_sample, samples, threads)
    omega = running_max((r[1], r[0]) for r in results)
    chart_rank = min(r[2] for r in results)
    lagrangian_ok = omega[0] < tol["lagrangian"]
    stages.append(ConverseStage(
        "lagrangian", "pass" if lagrangian_ok else "fail", omega[0], tol["lagrangian"],
        {"argmax": omega[1], "chart_rank": chart_rank},
    ))
    logger.info(f"[CONVERSE] lagrangian stage: defect={omega[0]:.3e} chart rank={chart_rank}")
    if not lagrangian_ok:
        stages.extend(ConverseStage(name, "skipped") for name in ("rank", "superminimal", "containment"))
        return ConverseReport(tuple(stages))

    ranks = sorted({r[3] for r in results})
    rank_ok = ranks == [2]
    stages.append(ConverseStage(
        "rank", "pass" if rank_ok else "fail", float(max(abs(r - 2) for r in ranks)), 0.5,
        {"projected_ranks": ranks, "finding": None if rank_ok else "projection-not-surface"},
    ))
    if not rank_ok:
        logger.info(f"[CONVERSE] projection is not a surface: ranks {ranks}")
        stages.extend(ConverseStage(name, "skipped") for name in ("superminimal", "containment"))
        return ConverseReport(tuple(stages))

    pair = _projected_pair(candidate)
    relaxed = tol["vertical_fd"]
    outcome = None
    for swap in (False, True):
        try:
            sweep_result = sweep_superminimal(_projection_surface(candidate, pair, swap), with_holonomy=False, threads=threads)
        except TwistorKitError as e:
            outcome = (False, swap, float("inf"), str(e))
            break
        value = max(sweep_result.vertical[0], sweep_result.indicatrix[0])
        ok = value < relaxed and not sweep_result.negative_traversal
        outcome = (ok, swap, value, None)
        if ok:
            break
    ok, swap, value, error = outcome
    stages.append(ConverseStage(
        "superminimal", "pass" if ok else "fail", value, relaxed,
        {"parameters": [pair[1], pair[0]] if swap else list(pair), "error": error},
    ))

    worst = 0.0
    worst_at = None
    for index, _, _, _, projected, j_orthonormal in results:
        u_left, _, _ = np.linalg.svd(projected)
        plane = u_left[:, :2]
        value = operator_norm(plane.T @ j_orthonormal @ plane)
        if worst_at is None or value > worst:
            worst, worst_at = value, index
    contained = worst < tol["containment"]
    stages.append(ConverseStage(
        "containment", "pass" if contained else "fail", worst, tol["containment"], {"argmax": worst_at},
    ))
    logger.info(f"[CONVERSE] superminimal={'pass' if ok else 'fail'} containment={worst:.3e}")
    return ConverseReport(tuple(stages))
