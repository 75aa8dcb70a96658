"""
Immersed surfaces in a model 4-manifold and the three superminimality meters:
the vertical derivative of the canonical complex structure J0, the curvature
ellipse (indicatrix), and holonomy of the ambient connection along loops.

J0 at a surface point rotates the oriented tangent plane and the oriented
normal plane by a quarter turn: J0 e1 = e2, J0 e3 = e4.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

import store
from errors import DegenerateImmersionError, FrameCompletionError
from expression_parser import Expr, eval_jet2, parse, to_source
from services.geometry import (
    ChartCurve,
    CurveSegment,
    ManifoldModel,
    christoffel_at,
    chart_point,
    metric_at,
    parallel_transport,
)
from utils.numerics import g_inner, g_norm, operator_norm, running_max, stable_rank_order, sweep

logger = logging.getLogger(__name__)

CONDITION_BOUND = 1e6
FALLBACK_RESIDUAL = 1e-3
VERTICAL_STEP = 1e-5
VERTICAL_STEP_RELAXED = 1e-4
HOLONOMY_STEPS = 64
LOOP_CLOSURE_TOL = 1e-12

# J0 in an adapted frame: e1 -> e2, e2 -> -e1, e3 -> e4, e4 -> -e3
J_STD = np.array(
    [[0.0, -1.0, 0.0, 0.0],
     [1.0, 0.0, 0.0, 0.0],
     [0.0, 0.0, 0.0, -1.0],
     [0.0, 0.0, 1.0, 0.0]]
)
_J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


# ---------------------------------------------------------------------------
# Surface maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceJets:
    """Chart position and its first and second parameter derivatives"""
    x: np.ndarray
    xu: np.ndarray
    xv: np.ndarray
    xuu: np.ndarray
    xuv: np.ndarray
    xvv: np.ndarray


@dataclass(frozen=True)
class FormulaMap:
    """Four parsed coordinate formulas; derivatives are exact jets"""
    coords: Tuple[Expr, Expr, Expr, Expr]
    exact: bool = field(default=True, init=False)

    @classmethod
    def from_sources(cls, sources: Sequence[str]) -> "FormulaMap":
        if len(sources) != 4:
            raise ValueError(f"An immersion needs 4 coordinate formulas, got {len(sources)}")
        return cls(tuple(parse(source) for source in sources))

    @property
    def sources(self) -> List[str]:
        return [to_source(expr) for expr in self.coords]

    def position(self, u: float, v: float) -> np.ndarray:
        return self.jets(u, v).x

    def jets(self, u: float, v: float) -> SurfaceJets:
        values = [eval_jet2(expr, u, v) for expr in self.coords]
        return SurfaceJets(
            x=np.array([j.value for j in values]),
            xu=np.array([j.du for j in values]),
            xv=np.array([j.dv for j in values]),
            xuu=np.array([j.duu for j in values]),
            xuv=np.array([j.duv for j in values]),
            xvv=np.array([j.dvv for j in values]),
        )


@dataclass(frozen=True)
class CallableMap:
    """A plain (u, v) -> chart point function; derivatives by central differences"""
    func: Callable[[float, float], np.ndarray]
    first_step: float = 1e-5
    second_step: float = 1e-4
    exact: bool = field(default=False, init=False)

    def position(self, u: float, v: float) -> np.ndarray:
        return np.asarray(self.func(u, v), dtype=float)

    def jets(self, u: float, v: float) -> SurfaceJets:
        f = self.position
        h, k = self.first_step, self.second_step
        x = f(u, v)
        return SurfaceJets(
            x=x,
            xu=(f(u + h, v) - f(u - h, v)) / (2 * h),
            xv=(f(u, v + h) - f(u, v - h)) / (2 * h),
            xuu=(f(u + k, v) - 2 * x + f(u - k, v)) / k ** 2,
            xuv=(f(u + k, v + k) - f(u + k, v - k) - f(u - k, v + k) + f(u - k, v - k)) / (4 * k ** 2),
            xvv=(f(u, v + k) - 2 * x + f(u, v - k)) / k ** 2,
        )


SurfaceMap = Union[FormulaMap, CallableMap]


@dataclass(frozen=True)
class Domain:
    u0: float
    u1: float
    v0: float
    v1: float

    def __post_init__(self):
        if not (self.u1 > self.u0 and self.v1 > self.v0):
            raise ValueError(f"Empty parameter rectangle [{self.u0},{self.u1}]x[{self.v0},{self.v1}]")

    @property
    def center(self) -> Tuple[float, float]:
        return 0.5 * (self.u0 + self.u1), 0.5 * (self.v0 + self.v1)

    def contains(self, u: float, v: float, slack: float = 1e-12) -> bool:
        return self.u0 - slack <= u <= self.u1 + slack and self.v0 - slack <= v <= self.v1 + slack


@dataclass(frozen=True)
class ImmersedSurface:
    model: ManifoldModel
    chart_map: SurfaceMap
    domain: Domain
    grid: Tuple[int, int] = (8, 8)
    name: str = "custom"

    def __post_init__(self):
        if min(self.grid) < 2:
            raise ValueError(f"Surface grids need at least 2x2 samples, got {self.grid}")

    @property
    def exact(self) -> bool:
        return self.chart_map.exact

    @property
    def u_values(self) -> np.ndarray:
        return np.linspace(self.domain.u0, self.domain.u1, self.grid[0])

    @property
    def v_values(self) -> np.ndarray:
        return np.linspace(self.domain.v0, self.domain.v1, self.grid[1])

    def samples(self) -> List[Tuple[int, int, float, float]]:
        """(i, j, u, v) for every grid point, u index outermost"""
        return [
            (i, j, float(u), float(v))
            for i, u in enumerate(self.u_values)
            for j, v in enumerate(self.v_values)
        ]

    def point(self, u: float, v: float) -> np.ndarray:
        return chart_point(self.model, self.chart_map.position(u, v))

    def jets(self, u: float, v: float) -> SurfaceJets:
        jets = self.chart_map.jets(u, v)
        chart_point(self.model, jets.x)
        return jets

    @cached_property
    def reference_order(self) -> Tuple[int, ...]:
        """
        Order in which coordinate vectors complete (e1, e2) to a frame; fixed
        once per surface from the residuals at the domain centre.
        """
        u, v = self.domain.center
        jets = self.jets(u, v)
        g = metric_at(self.model, jets.x)
        e1, e2 = _tangent_pair(g, jets.xu, jets.xv)
        residuals = []
        for k in range(4):
            w = np.eye(4)[k]
            w = w - g_inner(g, e1, w) * e1 - g_inner(g, e2, w) * e2
            residuals.append(g_norm(g, w))
        return stable_rank_order(residuals)


# ---------------------------------------------------------------------------
# Adapted frames and the second fundamental form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdaptedFrame:
    """Columns e1..e4 in chart components; coefficients maps (d_u, d_v) onto (e1, e2)"""
    matrix: np.ndarray
    metric: np.ndarray
    coefficients: np.ndarray  # [e1 e2] = [x_u x_v] @ coefficients

    @property
    def e1(self) -> np.ndarray:
        return self.matrix[:, 0]

    @property
    def e2(self) -> np.ndarray:
        return self.matrix[:, 1]

    @property
    def e3(self) -> np.ndarray:
        return self.matrix[:, 2]

    @property
    def e4(self) -> np.ndarray:
        return self.matrix[:, 3]

    @property
    def inverse(self) -> np.ndarray:
        return self.matrix.T @ self.metric

    def j0(self) -> np.ndarray:
        """J0 as a chart endomorphism"""
        return self.matrix @ J_STD @ self.inverse


def _tangent_pair(g: np.ndarray, xu: np.ndarray, xv: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    gram = np.array([[g_inner(g, xu, xu), g_inner(g, xu, xv)], [g_inner(g, xv, xu), g_inner(g, xv, xv)]])
    eigen = np.linalg.eigvalsh(gram)
    if not np.all(np.isfinite(eigen)) or eigen[0] <= 0.0 or np.sqrt(eigen[-1] / eigen[0]) > CONDITION_BOUND:
        raise DegenerateImmersionError(
            f"Tangent vectors {xu.tolist()} and {xv.tolist()} are nearly dependent"
        )
    e1 = xu / g_norm(g, xu)
    w = xv - g_inner(g, xv, e1) * e1
    return e1, w / g_norm(g, w)


def adapted_frame(s: ImmersedSurface, u: float, v: float, jets: Optional[SurfaceJets] = None) -> AdaptedFrame:
    jets = jets or s.jets(u, v)
    g = metric_at(s.model, jets.x)
    e1, e2 = _tangent_pair(g, jets.xu, jets.xv)
    normals: List[np.ndarray] = []
    for k in s.reference_order:
        w = np.eye(4)[k]
        for b in [e1, e2] + normals:
            w = w - g_inner(g, b, w) * b
        norm = g_norm(g, w)
        if norm < FALLBACK_RESIDUAL:
            continue
        normals.append(w / norm)
        if len(normals) == 2:
            break
    if len(normals) < 2:
        raise FrameCompletionError(f"No coordinate vectors complete the frame at (u, v) = ({u}, {v})")
    matrix = np.column_stack([e1, e2] + normals)
    if np.linalg.det(matrix) < 0:
        matrix[:, [2, 3]] = matrix[:, [3, 2]]
    tangent = np.column_stack([jets.xu, jets.xv])
    # [x_u x_v] = [e1 e2] C with C upper triangular
    c = matrix[:, :2].T @ g @ tangent
    return AdaptedFrame(matrix=matrix, metric=g, coefficients=np.linalg.inv(c))


@dataclass(frozen=True)
class SecondFundamentalForm:
    """h[a, i, j] with a = 0, 1 for e3, e4 and i, j = 0, 1 for e1, e2"""
    h: np.ndarray

    def component(self, alpha: int, i: int, j: int) -> float:
        """One-based access: alpha in {3, 4}, i, j in {1, 2}"""
        return float(self.h[alpha - 3, i - 1, j - 1])


def _ambient_hessian(s: ImmersedSurface, jets: SurfaceJets) -> np.ndarray:
    """nabla_{d_c} d_b along the surface, indexed [c, b, :]"""
    gamma = christoffel_at(s.model, jets.x)
    tangents = [jets.xu, jets.xv]
    seconds = [[jets.xuu, jets.xuv], [jets.xuv, jets.xvv]]
    out = np.zeros((2, 2, 4))
    for c in range(2):
        for b in range(2):
            out[c, b] = seconds[c][b] + np.einsum("kij,i,j->k", gamma, tangents[c], tangents[b])
    return out


def second_fundamental_form(s: ImmersedSurface, u: float, v: float) -> SecondFundamentalForm:
    jets = s.jets(u, v)
    frame = adapted_frame(s, u, v, jets)
    hessian = _ambient_hessian(s, jets)
    h = np.zeros((2, 2, 2))
    for a in range(2):
        normal = frame.matrix[:, 2 + a]
        coordinate_form = np.einsum("cbk,kl,l->cb", hessian, frame.metric, normal)
        h[a] = frame.coefficients.T @ coordinate_form @ frame.coefficients
    h = 0.5 * (h + np.transpose(h, (0, 2, 1)))
    return SecondFundamentalForm(h)


def mean_curvature_surface(s: ImmersedSurface, u: float, v: float) -> np.ndarray:
    """Trace of h per normal direction (no factor 1/2)"""
    h = second_fundamental_form(s, u, v).h
    return np.array([h[0, 0, 0] + h[0, 1, 1], h[1, 0, 0] + h[1, 1, 1]])


# ---------------------------------------------------------------------------
# Indicatrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IndicatrixReport:
    center: np.ndarray
    semi_axes: Tuple[float, float]
    circularity_defect: float
    traversal: int  # +1 same sense as the tangent circle, -1 opposite, 0 degenerate

    @property
    def is_superminimal(self) -> bool:
        return self.traversal >= 0


def indicatrix(form: SecondFundamentalForm, degenerate_tol: float = 1e-12) -> IndicatrixReport:
    """
    II(X, X) for X = cos(t) e1 + sin(t) e2 equals H/2 + a cos(2t) + b sin(2t)
    with a = (h11 - h22)/2 and b = h12, so the ellipse is centred at H/2 with
    semi-axes the singular values of [a b].
    """
    h = form.h
    center = 0.5 * (h[:, 0, 0] + h[:, 1, 1])
    a = 0.5 * (h[:, 0, 0] - h[:, 1, 1])
    b = h[:, 0, 1]
    m = np.column_stack([a, b])
    sigma = np.linalg.svd(m, compute_uv=False)
    det = float(np.linalg.det(m))
    traversal = 0 if abs(det) <= degenerate_tol else (1 if det > 0 else -1)
    defect = max(abs(float(sigma[0] - sigma[1])), float(np.linalg.norm(center)))
    return IndicatrixReport(
        center=center,
        semi_axes=(float(sigma[0]), float(sigma[1])),
        circularity_defect=defect,
        traversal=traversal,
    )


# ---------------------------------------------------------------------------
# Vertical derivative of J0
# ---------------------------------------------------------------------------

def _j0_chart(s: ImmersedSurface, u: float, v: float) -> np.ndarray:
    return adapted_frame(s, u, v).j0()


def vertical_defect(s: ImmersedSurface, u: float, v: float) -> float:
    """
    max over X in {d_u, d_v}, scaled to unit length, of the operator norm of
    nabla_X J0 measured in the adapted frame.
    """
    step = VERTICAL_STEP if s.exact else VERTICAL_STEP_RELAXED
    jets = s.jets(u, v)
    frame = adapted_frame(s, u, v, jets)
    j0 = frame.j0()
    gamma = christoffel_at(s.model, jets.x)
    worst = 0.0
    for direction, velocity in ((np.array([1.0, 0.0]), jets.xu), (np.array([0.0, 1.0]), jets.xv)):
        du, dv = direction * step
        d_j0 = (_j0_chart(s, u + du, v + dv) - _j0_chart(s, u - du, v - dv)) / (2 * step)
        gamma_x = np.einsum("kil,i->kl", gamma, velocity)
        covariant = d_j0 + gamma_x @ j0 - j0 @ gamma_x
        in_frame = frame.inverse @ covariant @ frame.matrix
        worst = max(worst, operator_norm(in_frame) / g_norm(frame.metric, velocity))
    return worst


def vertical_defect_from_form(s: ImmersedSurface, u: float, v: float) -> float:
    """
    Same quantity from the second fundamental form: nabla_X J0 = 0 exactly when
    K(X) = [h^a(X, e_i)] commutes with the quarter turn.
    """
    form = second_fundamental_form(s, u, v).h
    frame = adapted_frame(s, u, v)
    worst = 0.0
    for column in range(2):
        # direction of d_u or d_v in (e1, e2) components
        c = np.linalg.inv(frame.coefficients)[:, column]
        c = c / np.linalg.norm(c)
        k = np.einsum("aij,i->aj", form, c)
        worst = max(worst, operator_norm(k @ _J2 - _J2 @ k))
    return worst


# ---------------------------------------------------------------------------
# Holonomy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolonomyReport:
    rotation: np.ndarray
    commutator_defect: float
    closing_defect: float


def cell_loops(s: ImmersedSurface) -> List[Tuple[Tuple[int, int], List[Tuple[float, float]]]]:
    """Closed counter-clockwise boundaries of every grid cell; the first corner is repeated last"""
    us, vs = s.u_values, s.v_values
    loops = []
    for i in range(len(us) - 1):
        for j in range(len(vs) - 1):
            corners = [(us[i], vs[j]), (us[i + 1], vs[j]), (us[i + 1], vs[j + 1]), (us[i], vs[j + 1]), (us[i], vs[j])]
            loops.append(((i, j), [(float(a), float(b)) for a, b in corners]))
    return loops


def holonomy_in_u2(s: ImmersedSurface, loop: Sequence[Tuple[float, float]], steps: int = HOLONOMY_STEPS) -> HolonomyReport:
    """
    Transport the adapted frame around a closed parameter polygon whose last
    corner repeats the first. Along the way g(t) = E(t)^-1 P_t E(0) is the
    transport seen from the adapted frames; the defect is the largest
    |[g(t), J0]| and the rotation is g(1).
    """
    corners = [tuple(map(float, c)) for c in loop]
    if len(corners) < 4:
        raise ValueError("A loop needs at least three corners and the closing one")
    if not np.allclose(corners[0], corners[-1], rtol=0.0, atol=LOOP_CLOSURE_TOL):
        raise ValueError(f"Loop is open: starts at {corners[0]} but ends at {corners[-1]}")
    corners = corners[:-1]
    for u, v in corners:
        if not s.domain.contains(u, v):
            raise ValueError(f"Loop corner ({u}, {v}) is outside the surface domain")
    corners.append(corners[0])

    param_segments = []
    chart_segments = []
    for (ua, va), (ub, vb) in zip(corners[:-1], corners[1:]):
        du, dv = ub - ua, vb - va

        def param(t, ua=ua, va=va, du=du, dv=dv):
            return ua + t * du, va + t * dv

        def position(t, param=param):
            return s.jets(*param(t)).x

        def velocity(t, param=param, du=du, dv=dv):
            jets = s.jets(*param(t))
            return du * jets.xu + dv * jets.xv

        param_segments.append(param)
        chart_segments.append(CurveSegment(position=position, velocity=velocity))

    start = adapted_frame(s, *corners[0])
    worst = [0.0]

    def observe(segment: int, t: float, transported: np.ndarray):
        frame = adapted_frame(s, *param_segments[segment](t))
        relative = frame.inverse @ transported
        worst[0] = max(worst[0], operator_norm(relative @ J_STD - J_STD @ relative))

    transported = parallel_transport(s.model, ChartCurve(tuple(chart_segments)), start.matrix, steps, observe)
    rotation = start.inverse @ transported
    closing = operator_norm(rotation @ J_STD - J_STD @ rotation)
    return HolonomyReport(rotation=rotation, commutator_defect=max(worst[0], closing), closing_defect=closing)


# ---------------------------------------------------------------------------
# Grid sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuperminimalSweep:
    """Maxima of every meter over a surface grid with their sample locations"""
    vertical: Tuple[float, Tuple[float, float]]
    indicatrix: Tuple[float, Tuple[float, float]]
    negative_traversal: bool
    holonomy: Tuple[float, Tuple[int, int]]
    mean_curvature: Tuple[float, Tuple[float, float]]
    exact: bool

    def classification(self, tolerances: dict) -> str:
        vertical_tol = tolerances["vertical"] if self.exact else tolerances["vertical_fd"]
        mean_tol = tolerances["mean_curvature_surface"] if self.exact else tolerances["vertical_fd"]
        if self.mean_curvature[0] >= mean_tol:
            return "non-minimal"
        if self.vertical[0] < vertical_tol:
            return "superminimal"
        return "minimal-not-superminimal"


def sweep_superminimal(s: ImmersedSurface, with_holonomy: bool = True, threads: Optional[int] = None) -> SuperminimalSweep:
    samples = s.samples()

    def per_point(sample):
        i, j, u, v = sample
        form = second_fundamental_form(s, u, v)
        report = indicatrix(form)
        h = form.h
        mean = float(np.hypot(h[0, 0, 0] + h[0, 1, 1], h[1, 0, 0] + h[1, 1, 1]))
        return vertical_defect(s, u, v), report, mean

    results = sweep(per_point, samples, threads)
    where = [(u, v) for _, _, u, v in samples]
    vertical = running_max((r[0], w) for r, w in zip(results, where))
    circularity = running_max((r[1].circularity_defect, w) for r, w in zip(results, where))
    negative = any(r[1].traversal < 0 for r in results)
    mean = running_max((r[2], w) for r, w in zip(results, where))

    holonomy = (0.0, None)
    if with_holonomy:
        loops = cell_loops(s)
        defects = sweep(lambda item: holonomy_in_u2(s, item[1]).commutator_defect, loops, threads)
        holonomy = running_max((d, cell) for d, (cell, _) in zip(defects, loops))
    logger.info(
        f"[SUPERMINIMAL] {s.name}: vertical={vertical[0]:.3e} indicatrix={circularity[0]:.3e} "
        f"holonomy={holonomy[0]:.3e} mean={mean[0]:.3e}"
    )
    return SuperminimalSweep(
        vertical=vertical,
        indicatrix=circularity,
        negative_traversal=negative,
        holonomy=holonomy,
        mean_curvature=mean,
        exact=s.exact,
    )
