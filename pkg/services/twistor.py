"""
The twistor space Z over a model 4-manifold.

A point of Z is a base chart point x plus a unit 3-vector j; j holds the
coefficients of a compatible complex structure in the quaternionic triple
(J1, J2, J3) built on the reference frame at x. Tangent vectors are pairs
(dx, dj) with j . dj = 0. The Levi-Civita connection moves j along a base
direction X by dj = R(X) j; what is left over is the vertical part.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from errors import FiberChartError, FiberTangentError, NonOrthonormalFrameError
from services.geometry import (
    CONNECTION_STEP,
    ManifoldModel,
    chart_point,
    metric_at,
    reference_connection,
    reference_frame,
)
from utils.numerics import levi_civita, orthonormality_defect, rk4_integrate

logger = logging.getLogger(__name__)

FRAME_TOL = 1e-8
POLE_HANDOFF = 0.9
POLE_LIMIT = 0.99
# largest |j . dj| per unit of |dj|
TANGENT_TOL = 1e-6
CHART_FD_STEP = 1e-4
# connection stencil relative to the Christoffel stencil
CONNECTION_RATIO = 0.1

J1 = np.array(
    [[0.0, -1.0, 0.0, 0.0],
     [1.0, 0.0, 0.0, 0.0],
     [0.0, 0.0, 0.0, -1.0],
     [0.0, 0.0, 1.0, 0.0]]
)
# e1 -> e3, e2 -> -e4, e3 -> -e1, e4 -> e2
J2 = np.array(
    [[0.0, 0.0, -1.0, 0.0],
     [0.0, 0.0, 0.0, 1.0],
     [1.0, 0.0, 0.0, 0.0],
     [0.0, -1.0, 0.0, 0.0]]
)
J3 = J1 @ J2
TRIPLE = np.stack([J1, J2, J3])
QUARTER_TURN = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class HermitianPack:
    lam: float
    sign: int = 1

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    @classmethod
    def parse(cls, lam: float, sign: str) -> "HermitianPack":
        return cls(float(lam), 1 if sign == "+" else -1)

    @property
    def label(self) -> str:
        return "+" if self.sign > 0 else "-"


@dataclass(frozen=True)
class TwistorPoint:
    base: np.ndarray
    fiber: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.fiber, dtype=float)
        norm = float(np.linalg.norm(j))
        if not abs(norm - 1.0) < 1e-9:
            raise ValueError(f"Fiber coordinates must be a unit vector, |j| = {norm}")
        object.__setattr__(self, "fiber", j)
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))


@dataclass(frozen=True)
class TwistorTangent:
    dx: np.ndarray
    dj: np.ndarray


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """<A, B> = tr(A^T B) / 4, for which the triple is orthonormal"""
    return 0.25 * float(np.trace(a.T @ b))


def triple_coordinates(matrix: np.ndarray) -> np.ndarray:
    """Coefficients of a frame endomorphism along (J1, J2, J3)"""
    return np.array([inner(J, matrix) for J in TRIPLE])


def pfaffian(form: np.ndarray) -> float:
    """omega ^ omega = 2 Pf(omega) e1234 for a 4x4 skew matrix"""
    return float(form[0, 1] * form[2, 3] - form[0, 2] * form[1, 3] + form[0, 3] * form[1, 2])


# ---------------------------------------------------------------------------
# Realizing complex structures
# ---------------------------------------------------------------------------

def realize_J(model: ManifoldModel, p, frame: np.ndarray, j) -> np.ndarray:
    """Chart matrix of j1 J1 + j2 J2 + j3 J3 built on an oriented orthonormal frame"""
    g = metric_at(model, p)
    defect = orthonormality_defect(frame, g)
    if defect > FRAME_TOL:
        raise NonOrthonormalFrameError(f"Frame is not orthonormal at {np.asarray(p).tolist()} (defect {defect:.3e})")
    if np.linalg.det(frame) <= 0:
        raise NonOrthonormalFrameError("Frame is not positively oriented")
    coeffs = np.einsum("a,aij->ij", np.asarray(j, dtype=float), TRIPLE)
    return frame @ coeffs @ frame.T @ g


def equator_J(frame: np.ndarray, theta: float) -> np.ndarray:
    """J_theta e1 = cos e3 + sin e4; the equator j = (0, cos, sin) of the fiber"""
    coeffs = np.cos(theta) * J2 + np.sin(theta) * J3
    return frame @ coeffs @ np.linalg.inv(frame)


def kahler_matrix(model: ManifoldModel, p, frame: np.ndarray, J: np.ndarray) -> np.ndarray:
    """omega_J(e_a, e_b) = g(J e_a, e_b) in the frame"""
    g = metric_at(model, p)
    return (J @ frame).T @ g @ frame


# ---------------------------------------------------------------------------
# Connection on the fiber
# ---------------------------------------------------------------------------

def fiber_rotations(model: ManifoldModel, p, step: float = CONNECTION_STEP) -> np.ndarray:
    """R[k] (3x3 skew) with dj = sum_k X^k R[k] j for the horizontal lift"""
    omega = reference_connection(model, p, step)
    rotations = np.zeros((4, 3, 3))
    for k in range(4):
        for b in range(3):
            for a in range(3):
                bracket = omega[k] @ TRIPLE[a] - TRIPLE[a] @ omega[k]
                rotations[k, b, a] = -inner(TRIPLE[b], bracket)
    return rotations


def horizontal_lift(model: ManifoldModel, tp: TwistorPoint, X) -> TwistorTangent:
    x = chart_point(model, tp.base)
    X = np.asarray(X, dtype=float)
    rotations = fiber_rotations(model, x)
    return TwistorTangent(dx=X, dj=np.einsum("k,kba,a->b", X, rotations, tp.fiber))


def fiber_velocity(j: np.ndarray, V: TwistorTangent) -> np.ndarray:
    """V.dj, checked to be tangent to the fiber sphere at j"""
    dj = np.asarray(V.dj, dtype=float)
    leak = abs(float(np.asarray(j) @ dj))
    if leak > TANGENT_TOL * max(1.0, float(np.linalg.norm(dj))):
        raise FiberTangentError(f"Fiber velocity leaves the sphere: j . dj = {leak:.3e}")
    return dj


def fiber_basis(j: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal (t1, t2) tangent to the sphere at j with t1 x t2 = j"""
    reference = np.array([1.0, 0.0, 0.0]) if abs(j[2]) > POLE_HANDOFF else np.array([0.0, 0.0, 1.0])
    t1 = np.cross(reference, j)
    t1 = t1 / np.linalg.norm(t1)
    return t1, np.cross(j, t1)


@dataclass(frozen=True)
class TwistorLocal:
    """Everything g_lambda and J^+- need at one point of Z"""
    point: TwistorPoint
    metric: np.ndarray
    frame: np.ndarray
    J: np.ndarray
    lifted: np.ndarray  # 3x4, column k is R[k] j
    t1: np.ndarray
    t2: np.ndarray

    @property
    def j(self) -> np.ndarray:
        return self.point.fiber

    def fiber_velocity(self, V: TwistorTangent) -> np.ndarray:
        return fiber_velocity(self.j, V)

    def vertical_part(self, V: TwistorTangent) -> np.ndarray:
        return self.fiber_velocity(V) - self.lifted @ np.asarray(V.dx, dtype=float)

    def to_coords(self, V: TwistorTangent) -> np.ndarray:
        dj = self.fiber_velocity(V)
        return np.concatenate([np.asarray(V.dx, dtype=float), [self.t1 @ dj, self.t2 @ dj]])

    def from_coords(self, coords: np.ndarray) -> TwistorTangent:
        return TwistorTangent(dx=np.array(coords[:4]), dj=coords[4] * self.t1 + coords[5] * self.t2)

    def lifted_coords(self) -> np.ndarray:
        """H with rows (t1, t2) and columns the base directions"""
        return np.vstack([self.t1 @ self.lifted, self.t2 @ self.lifted])

    def metric6(self, lam: float) -> np.ndarray:
        h = self.lifted_coords()
        p = np.block([[np.eye(4), np.zeros((4, 2))], [-h, np.eye(2)]])
        middle = np.block([[self.metric, np.zeros((4, 2))], [np.zeros((2, 4)), np.eye(2) / lam ** 2]])
        return p.T @ middle @ p

    def acs6(self, sign: int) -> np.ndarray:
        h = self.lifted_coords()
        return np.block([
            [self.J, np.zeros((4, 2))],
            [h @ self.J - sign * QUARTER_TURN @ h, sign * QUARTER_TURN],
        ])

    def g_lambda(self, lam: float, V: TwistorTangent, W: TwistorTangent) -> float:
        horizontal = float(np.asarray(V.dx) @ self.metric @ np.asarray(W.dx))
        return horizontal + float(self.vertical_part(V) @ self.vertical_part(W)) / lam ** 2

    def apply_acs(self, sign: int, V: TwistorTangent) -> TwistorTangent:
        dx = self.J @ np.asarray(V.dx, dtype=float)
        vertical = sign * np.cross(self.j, self.vertical_part(V))
        return TwistorTangent(dx=dx, dj=self.lifted @ dx + vertical)

    def kahler_split(self, pack: HermitianPack, V: TwistorTangent, W: TwistorTangent) -> Tuple[float, float]:
        """(horizontal, vertical) parts of omega_+-(V, W) = g_lambda(J^+- V, W)"""
        horizontal = float((self.J @ np.asarray(V.dx)) @ self.metric @ np.asarray(W.dx))
        vertical = pack.sign * float(np.cross(self.j, self.vertical_part(V)) @ self.vertical_part(W)) / pack.lam ** 2
        return horizontal, vertical


def twistor_local(model: ManifoldModel, tp: TwistorPoint, rotations: Optional[np.ndarray] = None) -> TwistorLocal:
    x = chart_point(model, tp.base)
    frame = reference_frame(model, x)
    if rotations is None:
        rotations = fiber_rotations(model, x)
    t1, t2 = fiber_basis(tp.fiber)
    return TwistorLocal(
        point=tp,
        metric=metric_at(model, x),
        frame=frame,
        J=realize_J(model, x, frame, tp.fiber),
        lifted=np.einsum("kba,a->bk", rotations, tp.fiber),
        t1=t1,
        t2=t2,
    )


def twistor_metric(pack: HermitianPack, model: ManifoldModel, tp: TwistorPoint) -> np.ndarray:
    """g_lambda on (dx, a, b) with dj = a t1 + b t2"""
    return twistor_local(model, tp).metric6(pack.lam)


def twistor_acs(pack: HermitianPack, model: ManifoldModel, tp: TwistorPoint) -> np.ndarray:
    """J^+- on (dx, a, b): the realized J horizontally, +-(j x .) vertically"""
    return twistor_local(model, tp).acs6(pack.sign)


def kahler_form(pack: HermitianPack, model: ManifoldModel, tp: TwistorPoint, V: TwistorTangent, W: TwistorTangent) -> float:
    horizontal, vertical = twistor_local(model, tp).kahler_split(pack, V, W)
    return horizontal + vertical


def kahler_split(pack: HermitianPack, model: ManifoldModel, tp: TwistorPoint, V: TwistorTangent, W: TwistorTangent) -> Tuple[float, float]:
    return twistor_local(model, tp).kahler_split(pack, V, W)


# ---------------------------------------------------------------------------
# Stereographic fiber charts and the chart metric of Z
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiberChart:
    """Stereographic coordinates on the fiber sphere from the north or south pole"""
    pole: str = "north"

    @property
    def _s(self) -> float:
        return 1.0 if self.pole == "north" else -1.0

    @classmethod
    def choose(cls, j: np.ndarray) -> "FiberChart":
        return cls("south" if j[2] > POLE_HANDOFF else "north")

    @classmethod
    def facing(cls, j: np.ndarray) -> "FiberChart":
        """The chart whose excluded pole is in the opposite hemisphere"""
        return cls("south" if j[2] > 0 else "north")

    def to_sphere(self, zeta: np.ndarray) -> np.ndarray:
        r2 = float(zeta @ zeta)
        return np.array([2 * zeta[0], 2 * zeta[1], self._s * (r2 - 1.0)]) / (r2 + 1.0)

    def jacobian(self, zeta: np.ndarray) -> np.ndarray:
        r2 = float(zeta @ zeta)
        d = r2 + 1.0
        jac = np.zeros((3, 2))
        for a in range(2):
            for b in range(2):
                jac[b, a] = 2.0 * (a == b) / d - 4.0 * zeta[a] * zeta[b] / d ** 2
            jac[2, a] = self._s * 4.0 * zeta[a] / d ** 2
        return jac

    def from_sphere(self, j: np.ndarray) -> np.ndarray:
        height = self._s * j[2]
        if height > POLE_LIMIT:
            raise FiberChartError(f"Fiber point {np.asarray(j).tolist()} is at the {self.pole} pole of its chart")
        return np.array([j[0], j[1]]) / (1.0 - height)


def chart_metric(model: ManifoldModel, chart: FiberChart, y: np.ndarray, lam: float,
                 connection_step: float = CONNECTION_STEP) -> np.ndarray:
    """g_lambda in the coordinates y = (x, zeta) of Z"""
    x, zeta = y[:4], y[4:]
    j = chart.to_sphere(zeta)
    rotations = fiber_rotations(model, x, connection_step)
    lifted = np.einsum("kba,a->bk", rotations, j)
    vertical = np.hstack([-lifted, chart.jacobian(zeta)])
    base = np.zeros((6, 6))
    base[:4, :4] = metric_at(model, x)
    return base + vertical.T @ vertical / lam ** 2


def chart_christoffel(model: ManifoldModel, chart: FiberChart, y: np.ndarray, lam: float, h: float = CHART_FD_STEP) -> np.ndarray:
    """Christoffel symbols of g_lambda in the chart; the fiber connection is differenced at h * CONNECTION_RATIO"""
    y = np.asarray(y, dtype=float)
    inner_step = h * CONNECTION_RATIO
    derivative = np.stack([
        (chart_metric(model, chart, y + h * e, lam, inner_step) - chart_metric(model, chart, y - h * e, lam, inner_step)) / (2 * h)
        for e in np.eye(6)
    ])
    return levi_civita(chart_metric(model, chart, y, lam, inner_step), derivative)


def twistor_geodesic(
    model: ManifoldModel,
    pack: HermitianPack,
    tp: TwistorPoint,
    V: TwistorTangent,
    duration: float = 1.0,
    steps: int = 64,
    chart: Optional[FiberChart] = None,
) -> TwistorPoint:
    """Integrate the g_lambda geodesic equation in one (x, zeta) chart"""
    chart = chart or FiberChart.facing(tp.fiber)
    zeta = chart.from_sphere(tp.fiber)
    jac = chart.jacobian(zeta)
    dzeta, *_ = np.linalg.lstsq(jac, fiber_velocity(tp.fiber, V), rcond=None)
    state = np.concatenate([tp.base, zeta, V.dx, dzeta])

    def rhs(t: float, s: np.ndarray) -> np.ndarray:
        gamma = chart_christoffel(model, chart, s[:6], pack.lam)
        return np.concatenate([s[6:], -np.einsum("kij,i,j->k", gamma, s[6:], s[6:])])

    final = rk4_integrate(rhs, state, 0.0, duration, steps)
    j = chart.to_sphere(final[4:6])
    return TwistorPoint(base=final[:4], fiber=j / np.linalg.norm(j))
