"""
Chart-based Riemannian geometry on the three model 4-manifolds.

FlatR4          Euclidean metric on R^4.
RoundS4         unit sphere in stereographic coordinates, g = 4/(1+|x|^2)^2 * I.
FubiniStudyCP2  affine chart z1 = x0 + i x1, z2 = x2 + i x3 with
                h = ((1+|z|^2) I - z z^H) / (1+|z|^2)^2, g = Re h (identity at 0).

Metric derivatives are closed form for every model; Christoffel symbols follow
from them and the curvature tensor is a central difference of the Christoffels.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from errors import ChartDomainError, TransportError
from utils.numerics import central_difference, levi_civita, rk4_integrate

logger = logging.getLogger(__name__)

CURVATURE_STEP = 1e-5
CONNECTION_STEP = 1e-5
DEFAULT_TRANSPORT_STEPS = 512


class ModelKind(str, Enum):
    FLAT_R4 = "FlatR4"
    ROUND_S4 = "RoundS4"
    FUBINI_STUDY_CP2 = "FubiniStudyCP2"


@dataclass(frozen=True)
class ManifoldModel:
    kind: ModelKind
    chart_radius: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not self.chart_radius > 0:
            raise ValueError(f"chart_radius must be positive, got {self.chart_radius}")

    @classmethod
    def named(cls, name: str, chart_radius: float = 10.0) -> "ManifoldModel":
        return cls(ModelKind(name), chart_radius)

    @property
    def name(self) -> str:
        return self.kind.value


def chart_point(model: ManifoldModel, p) -> np.ndarray:
    """Validate a chart point and return it as a float 4-vector"""
    x = np.asarray(p, dtype=float).reshape(-1)
    if x.shape != (4,):
        raise ChartDomainError(f"Chart points have 4 coordinates, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ChartDomainError(f"Chart point {x.tolist()} is not finite")
    if float(np.linalg.norm(x)) >= model.chart_radius:
        raise ChartDomainError(
            f"Point {x.tolist()} is outside the {model.name} chart (|x| < {model.chart_radius})"
        )
    return x


# ---------------------------------------------------------------------------
# Fubini-Study helpers
# ---------------------------------------------------------------------------

def _complex_coords(x: np.ndarray) -> np.ndarray:
    return np.array([x[0] + 1j * x[1], x[2] + 1j * x[3]])


def _realify(hermitian: np.ndarray) -> np.ndarray:
    """Real 4x4 form of Re(xi^H h eta) in the ordering (Re z1, Im z1, Re z2, Im z2)"""
    a, b = hermitian.real, hermitian.imag
    g = np.zeros((4, 4))
    for r in range(2):
        for c in range(2):
            g[2 * r, 2 * c] = a[r, c]
            g[2 * r + 1, 2 * c + 1] = a[r, c]
            g[2 * r, 2 * c + 1] = -b[r, c]
            g[2 * r + 1, 2 * c] = b[r, c]
    return g


def _fubini_study_hermitian(x: np.ndarray) -> np.ndarray:
    z = _complex_coords(x)
    s = 1.0 + float(np.vdot(z, z).real)
    return (s * np.eye(2) - np.outer(z, z.conj())) / s ** 2


def _fubini_study_hermitian_derivative(x: np.ndarray, k: int) -> np.ndarray:
    z = _complex_coords(x)
    s = 1.0 + float(np.vdot(z, z).real)
    eps = np.zeros(2, dtype=complex)
    eps[k // 2] = 1.0 if k % 2 == 0 else 1j
    zz = np.outer(z, z.conj())
    return (
        -2.0 * x[k] * np.eye(2) / s ** 2
        - (np.outer(eps, z.conj()) + np.outer(z, eps.conj())) / s ** 2
        + 4.0 * x[k] * zz / s ** 3
    )


# ---------------------------------------------------------------------------
# Metric, connection, curvature
# ---------------------------------------------------------------------------

def metric_at(model: ManifoldModel, p) -> np.ndarray:
    x = chart_point(model, p)
    if model.kind is ModelKind.FLAT_R4:
        return np.eye(4)
    if model.kind is ModelKind.ROUND_S4:
        return 4.0 / (1.0 + x @ x) ** 2 * np.eye(4)
    return _realify(_fubini_study_hermitian(x))


def metric_derivative_at(model: ManifoldModel, p) -> np.ndarray:
    """dg[k, i, j] = d g_ij / d x_k"""
    x = chart_point(model, p)
    if model.kind is ModelKind.FLAT_R4:
        return np.zeros((4, 4, 4))
    if model.kind is ModelKind.ROUND_S4:
        factor = -16.0 / (1.0 + x @ x) ** 3
        return np.einsum("k,ij->kij", factor * x, np.eye(4))
    return np.stack([_realify(_fubini_study_hermitian_derivative(x, k)) for k in range(4)])


def christoffel_at(model: ManifoldModel, p) -> np.ndarray:
    """Gamma[k, i, j], upper index first"""
    if model.kind is ModelKind.FLAT_R4:
        chart_point(model, p)
        return np.zeros((4, 4, 4))
    return levi_civita(metric_at(model, p), metric_derivative_at(model, p))


def riemann_at(model: ManifoldModel, p) -> np.ndarray:
    """
    Lowered curvature R[i, j, k, l] = <R(d_i, d_j) d_l, d_k> with
    R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y]; the unit sphere gives
    g_ik g_jl - g_il g_jk.
    """
    x = chart_point(model, p)
    if model.kind is ModelKind.FLAT_R4:
        return np.zeros((4, 4, 4, 4))
    gamma = christoffel_at(model, x)
    d_gamma = central_difference(lambda y: christoffel_at(model, y), x, CURVATURE_STEP)
    # upper[m, l, i, j] = R^m_{l i j}
    upper = (
        np.einsum("imjl->mlij", d_gamma)
        - np.einsum("jmil->mlij", d_gamma)
        + np.einsum("mip,pjl->mlij", gamma, gamma)
        - np.einsum("mjp,pil->mlij", gamma, gamma)
    )
    return np.einsum("km,mlij->ijkl", metric_at(model, x), upper)


def sectional_curvature(model: ManifoldModel, p, a: np.ndarray, b: np.ndarray) -> float:
    riemann = riemann_at(model, p)
    g = metric_at(model, p)
    numerator = np.einsum("ijkl,i,j,k,l->", riemann, a, b, a, b)
    area = (a @ g @ a) * (b @ g @ b) - (a @ g @ b) ** 2
    return float(numerator / area)


# ---------------------------------------------------------------------------
# Reference frames
# ---------------------------------------------------------------------------

def reference_frame(model: ManifoldModel, p) -> np.ndarray:
    """
    Positively oriented g-orthonormal frame E = R^-1 with g = R^T R (upper
    Cholesky factor); columns are the frame vectors in chart components.
    """
    upper = cholesky(metric_at(model, p), lower=False)
    return solve_triangular(upper, np.eye(4), lower=False)


def reference_connection(model: ManifoldModel, p, step: float = CONNECTION_STEP) -> np.ndarray:
    """
    Connection matrices omega[k] = E^-1 (d_k E + Gamma_k E) of the reference
    frame; each omega[k] is skew.
    """
    x = chart_point(model, p)
    frame = reference_frame(model, x)
    if model.kind is ModelKind.FLAT_R4:
        return np.zeros((4, 4, 4))
    d_frame = central_difference(lambda y: reference_frame(model, y), x, step)
    gamma = christoffel_at(model, x)
    inverse = frame.T @ metric_at(model, x)
    # Gamma_k as a matrix: (Gamma_k)^a_b = Gamma^a_{k b}
    gamma_k = np.einsum("akb->kab", gamma)
    return np.einsum("ab,kbc->kac", inverse, d_frame + gamma_k @ frame)


# ---------------------------------------------------------------------------
# Curves and parallel transport
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CurveSegment:
    """One smooth piece of a chart curve, parametrized on [0, 1]"""
    position: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]


def line_segment(a: Sequence[float], b: Sequence[float]) -> CurveSegment:
    start = np.asarray(a, dtype=float)
    delta = np.asarray(b, dtype=float) - start
    return CurveSegment(position=lambda t: start + t * delta, velocity=lambda t: delta)


@dataclass(frozen=True)
class ChartCurve:
    segments: Tuple[CurveSegment, ...]

    @classmethod
    def polyline(cls, points: Sequence[Sequence[float]], closed: bool = False) -> "ChartCurve":
        pts = [np.asarray(p, dtype=float) for p in points]
        if closed:
            pts.append(pts[0])
        if len(pts) < 2:
            raise ValueError("A polyline needs at least two points")
        return cls(tuple(line_segment(a, b) for a, b in zip(pts[:-1], pts[1:])))

    @property
    def start(self) -> np.ndarray:
        return np.asarray(self.segments[0].position(0.0), dtype=float)

    @property
    def end(self) -> np.ndarray:
        return np.asarray(self.segments[-1].position(1.0), dtype=float)

    def is_closed(self, tol: float = 1e-12) -> bool:
        return float(np.linalg.norm(self.end - self.start)) <= tol


def parallel_transport(
    model: ManifoldModel,
    curve: ChartCurve,
    frame: np.ndarray,
    steps: int = DEFAULT_TRANSPORT_STEPS,
    on_step: Optional[Callable[[int, float, np.ndarray], None]] = None,
) -> np.ndarray:
    """
    RK4 solution of dV^k/dt = -Gamma^k_ij x'^i V^j applied to every column of
    `frame`, with `steps` steps per curve segment. `on_step(segment, t, frame)`
    sees the frame after every step.
    """
    current = np.array(frame, dtype=float)
    if current.shape[0] != 4:
        raise TransportError(f"Frames have 4 rows, got {current.shape[0]}")
    width = current.shape[1]
    for index, segment in enumerate(curve.segments):
        def rhs(t: float, flat: np.ndarray, segment=segment) -> np.ndarray:
            position = segment.position(t)
            try:
                gamma = christoffel_at(model, position)
            except ChartDomainError as e:
                raise ChartDomainError(f"Curve exits the chart: {e}")
            vectors = flat.reshape(4, width)
            return -np.einsum("kij,i,jc->kc", gamma, segment.velocity(t), vectors).reshape(-1)

        callback = None
        if on_step is not None:
            callback = lambda t, flat, index=index: on_step(index, t, flat.reshape(4, width))
        current = rk4_integrate(rhs, current.reshape(-1), 0.0, 1.0, steps, callback).reshape(4, width)
    return current


def rotation_angle_in_plane(start_frame: np.ndarray, end_frame: np.ndarray, metric: np.ndarray) -> float:
    """Angle by which the first frame vector turned inside span(f1, f2)"""
    relative = start_frame.T @ metric @ end_frame
    return float(np.arctan2(relative[1, 0], relative[0, 0]))


def sample_points(model: ManifoldModel, count: int, radius: float, seed: int = 0) -> List[np.ndarray]:
    """Deterministic random chart points with |x| < radius"""
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < count:
        candidate = rng.uniform(-radius, radius, size=4)
        if np.linalg.norm(candidate) < min(radius, 0.99 * model.chart_radius):
            points.append(candidate)
    return points
