"""
Exact checks on so(5) for the homogeneous model SO(5)/U(2) of the twistor space.

so(4) sits in the upper-left 4x4 block, p is spanned by the rotations
e_i ^ e_5, and J0 = E(2,1) + E(4,3) is the standard complex structure. The
splitting so(5) = u(2) + n + p puts the commutant of J0 in u(2), the part of
so(4) anticommuting with J0 in n, and the fifth row and column in p.
Every check returns a LieCheck; `run_lie_suite` collects them into the table
printed by `verify-lie`.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm, null_space, orth

import store
from services.geometry import ManifoldModel, reference_frame, riemann_at
from services.twistor import J1, J2, J3, equator_J

logger = logging.getLogger(__name__)

SKEW_TOL = 1e-14
KILLING_SCALE = 3.0
THETA_SAMPLES = tuple(np.linspace(0.0, 2.0 * np.pi, 13)[:-1])
B0 = np.array(
    [[1.0, 0.0, 0.0, -1.0],
     [0.0, 1.0, -1.0, 0.0],
     [0.0, 1.0, 1.0, 0.0],
     [1.0, 0.0, 0.0, 1.0]]
) / np.sqrt(2.0)


def elementary(a: int, b: int) -> np.ndarray:
    """E(a, b) = e_a e_b^T - e_b e_a^T in so(5), zero-based"""
    m = np.zeros((5, 5))
    m[a, b] = 1.0
    m[b, a] = -1.0
    return m


def embed(block: np.ndarray) -> np.ndarray:
    out = np.zeros((5, 5))
    out[:4, :4] = block
    return out


def bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def killing(x: np.ndarray, y: np.ndarray) -> float:
    """B(X, Y) = 3 tr(XY)"""
    return KILLING_SCALE * float(np.trace(x @ y))


J0 = elementary(1, 0) + elementary(3, 2)
SO5_BASIS = tuple(elementary(b, a) for a, b in combinations(range(5), 2))
SO4_BASIS = tuple(elementary(b, a) for a, b in combinations(range(4), 2))


# ---------------------------------------------------------------------------
# Cartan decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class So5Element:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (5, 5):
            raise ValueError(f"so(5) elements are 5x5, got {m.shape}")
        if np.max(np.abs(m + m.T)) > SKEW_TOL * max(1.0, float(np.max(np.abs(m)))):
            raise ValueError("Matrix is not skew-symmetric")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class Decomposition:
    h: np.ndarray
    n: np.ndarray
    p: np.ndarray

    @property
    def m(self) -> np.ndarray:
        return self.n + self.p

    @property
    def total(self) -> np.ndarray:
        return self.h + self.n + self.p


def cartan_decompose(x) -> Decomposition:
    x = x.matrix if isinstance(x, So5Element) else So5Element(x).matrix
    block = embed(x[:4, :4])
    conjugated = J0 @ block @ J0
    return Decomposition(h=0.5 * (block - conjugated), n=0.5 * (block + conjugated), p=x - block)


def _span(elements: Sequence[np.ndarray]) -> Tuple[np.ndarray, ...]:
    columns = orth(np.column_stack([e.reshape(-1) for e in elements]))
    return tuple(columns[:, k].reshape(5, 5) for k in range(columns.shape[1]))


U2_BASIS = _span([cartan_decompose(e).h for e in SO4_BASIS])
N_BASIS = (embed(J2), embed(J3))
P_BASIS = tuple(elementary(i, 4) for i in range(4))
M_BASIS = N_BASIS + P_BASIS


def g_lambda(lam: float, x: np.ndarray, y: np.ndarray) -> float:
    """-B / lambda^2 on n plus -B on p; u(2) parts are ignored"""
    dx, dy = cartan_decompose(x), cartan_decompose(y)
    return -killing(dx.n, dy.n) / lam ** 2 - killing(dx.p, dy.p)


def g_kahler(x: np.ndarray, y: np.ndarray) -> float:
    dx, dy = cartan_decompose(x), cartan_decompose(y)
    return -2.0 * killing(dx.n, dy.n) - killing(dx.p, dy.p)


def gram(form: Callable[[np.ndarray, np.ndarray], float], basis: Sequence[np.ndarray] = M_BASIS) -> np.ndarray:
    return np.array([[form(a, b) for b in basis] for a in basis])


def adjoint(group_element: np.ndarray, x: np.ndarray) -> np.ndarray:
    return group_element @ x @ np.linalg.inv(group_element)


def lift_so4_group(block: np.ndarray) -> np.ndarray:
    out = np.eye(5)
    out[:4, :4] = block
    return out


# ---------------------------------------------------------------------------
# Check results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LieCheck:
    name: str
    residual: float
    tolerance: float
    detail: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


def _tol(tolerance: Optional[float]) -> float:
    return store.DEFAULT_TOLERANCES["lie"] if tolerance is None else tolerance


def check_decomposition(tolerance: Optional[float] = None) -> LieCheck:
    """Components sum back, lie in their subspaces, are B-orthogonal and idempotent"""
    worst = 0.0
    for x in SO5_BASIS + (J0, N_BASIS[0] + P_BASIS[1]):
        d = cartan_decompose(x)
        worst = max(worst, float(np.max(np.abs(d.total - x))))
        worst = max(worst, float(np.max(np.abs(bracket(d.h, J0)))))
        worst = max(worst, float(np.max(np.abs(d.n @ J0 + J0 @ d.n))))
        worst = max(worst, float(np.max(np.abs(d.p[:4, :4]))))
        worst = max(worst, abs(killing(d.h, d.n)), abs(killing(d.h, d.p)), abs(killing(d.n, d.p)))
        again = [cartan_decompose(d.h).h, cartan_decompose(d.n).n, cartan_decompose(d.p).p]
        worst = max(worst, max(float(np.max(np.abs(a - b))) for a, b in zip(again, (d.h, d.n, d.p))))
    dims = {"u2": len(U2_BASIS), "n": len(_span(N_BASIS)), "p": len(_span(P_BASIS))}
    if dims != {"u2": 4, "n": 2, "p": 4}:
        worst = max(worst, 1.0)
    return LieCheck("cartan_decompose", worst, _tol(tolerance), {"dimensions": dims})


def check_killing_invariance(tolerance: Optional[float] = None) -> LieCheck:
    worst = 0.0
    for z, x, y in product(SO5_BASIS, repeat=3):
        worst = max(worst, abs(killing(bracket(z, x), y) + killing(x, bracket(z, y))))
    return LieCheck("killing_ad_invariance", worst, _tol(tolerance), {"triples": len(SO5_BASIS) ** 3})


def check_metric_family(lam: float, tolerance: Optional[float] = None) -> LieCheck:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    g = gram(lambda a, b: g_lambda(lam, a, b))
    eigen = np.linalg.eigvalsh(g)
    j0_norm = -killing(J0, J0)
    kahler_gap = float(np.max(np.abs(gram(g_kahler) - gram(lambda a, b: g_lambda(1.0 / np.sqrt(2.0), a, b)))))
    p_drift = float(np.max(np.abs(g[2:, 2:] - gram(lambda a, b: g_lambda(1.0, a, b))[2:, 2:])))
    residual = max(abs(j0_norm - 12.0), kahler_gap, p_drift, 0.0 if eigen[0] > 0 else 1.0)
    return LieCheck(
        f"metric_family(lambda={lam:g})", residual, _tol(tolerance),
        {"min_eigenvalue": float(eigen[0]), "minus_B_J0": j0_norm},
    )


# ---------------------------------------------------------------------------
# B_theta and the vertical unit vector
# ---------------------------------------------------------------------------

def b_theta(theta: float, half_angle: bool = False) -> np.ndarray:
    """exp(theta J0) B0, or exp(theta J0 / 2) B0 with half_angle"""
    angle = 0.5 * theta if half_angle else theta
    return expm(angle * J1) @ B0


def check_B_theta(thetas: Sequence[float] = THETA_SAMPLES, tolerance: Optional[float] = None) -> LieCheck:
    """
    B0 is orthogonal with det 1 and conjugates J0 to the basic equator point.
    exp(theta J0) B0 conjugates J0 to J_{2 theta}; exp(theta J0 / 2) B0 to J_theta.
    """
    identity = np.eye(4)
    listed = np.array([[1, 0, 0, -1], [0, 1, -1, 0], [0, 1, 1, 0], [1, 0, 0, 1]]) / np.sqrt(2.0)
    columns = np.column_stack([identity[:, 2], -identity[:, 3], -identity[:, 0], identity[:, 1]])
    start = B0 @ J1 @ B0.T
    residual = max(
        float(np.max(np.abs(B0 - listed))),
        float(np.max(np.abs(B0.T @ B0 - identity))),
        abs(float(np.linalg.det(B0)) - 1.0),
        float(np.max(np.abs(start - columns))),
        float(np.max(np.abs(start - equator_J(identity, 0.0)))),
    )
    full, half, full_vs_theta = 0.0, 0.0, 0.0
    for theta in thetas:
        b_full, b_half = b_theta(theta), b_theta(theta, half_angle=True)
        conj_full = b_full @ J1 @ np.linalg.inv(b_full)
        conj_half = b_half @ J1 @ np.linalg.inv(b_half)
        full = max(full, float(np.max(np.abs(conj_full - equator_J(identity, 2.0 * theta)))))
        half = max(half, float(np.max(np.abs(conj_half - equator_J(identity, theta)))))
        full_vs_theta = max(full_vs_theta, float(np.max(np.abs(conj_full - equator_J(identity, theta)))))
    return LieCheck(
        "B_theta", max(residual, full, half), _tol(tolerance),
        {
            "exp(theta J0) B0 -> J_2theta": full,
            "exp(theta J0/2) B0 -> J_theta": half,
            "exp(theta J0) B0 -> J_theta": full_vs_theta,
        },
    )


def vertical_unit(lam: float, theta: float = 0.0) -> np.ndarray:
    """(lam / sqrt 12) Ad(B_theta)^-1 J0, the model image of v3"""
    group = lift_so4_group(b_theta(theta, half_angle=True))
    return lam / np.sqrt(12.0) * adjoint(np.linalg.inv(group), J0)


def check_v3_normalization(lam: float, tolerance: Optional[float] = None) -> LieCheck:
    y = adjoint(lift_so4_group(B0).T, J0)
    d = cartan_decompose(y)
    anticommutator = float(np.max(np.abs(y @ J0 + J0 @ y)))
    v3 = vertical_unit(lam)
    residual = max(
        anticommutator,
        float(np.max(np.abs(d.h))),
        float(np.max(np.abs(d.p))),
        abs(g_lambda(lam, v3, v3) - 1.0),
    )
    return LieCheck(f"v3_normalization(lambda={lam:g})", residual, _tol(tolerance), {"anticommutator": anticommutator})


# ---------------------------------------------------------------------------
# Bracket grading
# ---------------------------------------------------------------------------

_SUBSPACES = {"u2": U2_BASIS, "n": N_BASIS, "p": P_BASIS}


def _outside(x: np.ndarray, allowed: Sequence[str]) -> float:
    d = cartan_decompose(x)
    parts = {"u2": d.h, "n": d.n, "p": d.p}
    return max((float(np.max(np.abs(parts[k]))) for k in parts if k not in allowed), default=0.0)


GRADING_RULES = (
    ("u2", "u2", ("u2",)),
    ("u2", "n", ("n",)),
    ("u2", "p", ("p",)),
    ("n", "n", ("u2",)),
    ("n", "p", ("p",)),
    ("p", "p", ("u2", "n")),
)


def check_bracket_grading(tolerance: Optional[float] = None) -> LieCheck:
    """[p, p] lands in so(4) = u(2) + n, so its m-part lies in n"""
    detail = {}
    worst = 0.0
    for left, right, allowed in GRADING_RULES:
        pairs = list(product(_SUBSPACES[left], _SUBSPACES[right]))
        value = max(_outside(bracket(a, b), allowed) for a, b in pairs)
        detail[f"[{left},{right}]"] = {"pairs": len(pairs), "residual": value}
        worst = max(worst, value)
    return LieCheck("bracket_grading", worst, _tol(tolerance), detail)


# ---------------------------------------------------------------------------
# Torsion identities
# ---------------------------------------------------------------------------

def t_form(lam: float, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> float:
    """t_lambda(X, Y, Z) = g_lambda([X, Y], Z)"""
    return g_lambda(lam, bracket(x, y), z)


def mixed_bracket(z: np.ndarray, x: np.ndarray) -> np.ndarray:
    """[Z_n, X_p] - [X_n, Z_p]"""
    dz, dx = cartan_decompose(z), cartan_decompose(x)
    return bracket(dz.n, dx.p) - bracket(dx.n, dz.p)


CurvatureFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def curvature_function(model: ManifoldModel, point) -> CurvatureFunction:
    """
    R(X, Y) in so(4), embedded in so(5), from the chart curvature at `point`
    read in the reference frame; only the p-components of X and Y enter.
    """
    frame = reference_frame(model, point)
    riemann = np.einsum("ijkl,ia,jb,kc,ld->abcd", riemann_at(model, point), frame, frame, frame, frame)

    def evaluate(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        xp, yp = cartan_decompose(x).p[:4, 4], cartan_decompose(y).p[:4, 4]
        block = np.einsum("ijkl,i,j->kl", riemann, xp, yp)
        return embed(0.5 * (block - block.T))

    return evaluate


def curvature_pairing_defect(model: ManifoldModel, point, lam: float) -> Tuple[float, float]:
    """
    max |g_lambda(R(Z, X)_n, X)| over basis Z in m and X in n or p, plus the
    largest p-component of R(Z, X) (the curvature takes values in so(4)).
    """
    curvature = curvature_function(model, point)
    pairing, leak = 0.0, 0.0
    for z, x in product(M_BASIS, M_BASIS):
        r = curvature(z, x)
        d = cartan_decompose(r)
        pairing = max(pairing, abs(g_lambda(lam, d.n, x)))
        leak = max(leak, float(np.max(np.abs(d.p))))
    return pairing, leak


_M = np.array(M_BASIS)


def _parts(stack: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """n- and p-components of a stack of so(5) matrices"""
    block = np.array(stack, dtype=float)
    block[..., 4, :] = 0.0
    block[..., :, 4] = 0.0
    return 0.5 * (block + J0 @ block @ J0), np.asarray(stack, dtype=float) - block


def _commutators(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """[xs[a], ys[b]] for every pair, shape (a, b, 5, 5)"""
    left, right = xs[:, None], ys[None, :]
    return left @ right - right @ left


def _pair_with_basis(lam: float, stack: np.ndarray) -> np.ndarray:
    """g_lambda(stack[...], M_c) with the basis index last"""
    sn, sp = _parts(stack)
    return -KILLING_SCALE * (
        np.einsum("...ij,cji->...c", sn, _M_N) / lam ** 2 + np.einsum("...ij,cji->...c", sp, _M_P)
    )


_M_N, _M_P = _parts(_M)
BRACKETS = _commutators(_M, _M)
# [Z_n, X_p] - [X_n, Z_p] for Z = M_a, X = M_b
MIXED = _commutators(_M_N, _M_P) - _commutators(_M_N, _M_P).swapaxes(0, 1)


def t_tensor(lam: float) -> np.ndarray:
    """t[a, b, c] = t_lambda(M_a, M_b, M_c)"""
    return _pair_with_basis(lam, BRACKETS)


def torsion_tensor(lam: float, curvature: Optional[CurvatureFunction] = None) -> np.ndarray:
    """
    T[a, b, c] = g_lambda(T_hat(M_a, M_b), M_c) with T_hat = kappa_m - t and
    kappa_m = R_n - ([X_n, Y_p] - [Y_n, X_p]); without a curvature function
    R_n is dropped.
    """
    kappa = -MIXED
    if curvature is not None:
        values = np.array([[curvature(x, y) for y in M_BASIS] for x in M_BASIS])
        kappa = kappa + _parts(values)[0]
    return _pair_with_basis(lam, kappa - BRACKETS)


def connection_tensor(T: np.ndarray) -> np.ndarray:
    """A[a, b, c] = g_lambda(A(M_a) M_b, M_c) = (T[a,b,c] - T[b,c,a] + T[c,a,b]) / 2"""
    return 0.5 * (T - np.einsum("bca->abc", T) + np.einsum("cab->abc", T))


def m_coordinates(x: np.ndarray) -> Tuple[np.ndarray, float]:
    """Coordinates of x in M_BASIS, and the largest entry of x left outside m"""
    flat = _M.reshape(len(M_BASIS), -1).T
    x = np.asarray(x, dtype=float).reshape(-1)
    coords, *_ = np.linalg.lstsq(flat, x, rcond=None)
    return coords, float(np.max(np.abs(flat @ coords - x)))


def model_frame(lam: float, theta: float = 0.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """g_lambda-orthonormal (v1, v2, v3) of the lift in the homogeneous model"""
    inverse = np.linalg.inv(lift_so4_group(b_theta(theta, half_angle=True)))
    scale = 1.0 / np.sqrt(-killing(P_BASIS[0], P_BASIS[0]))
    v1 = scale * adjoint(inverse, P_BASIS[0])
    v2 = scale * adjoint(inverse, P_BASIS[1])
    return v1, v2, vertical_unit(lam, theta)


def _frame_coordinates(lam: float, theta: float) -> Tuple[np.ndarray, float]:
    fitted = [m_coordinates(v) for v in model_frame(lam, theta)]
    return np.array([c for c, _ in fitted]), max(r for _, r in fitted)


def verify_lemma_A(lambdas: Sequence[float] = store.DEFAULT_LAMBDAS,
                   model: Optional[ManifoldModel] = None, point=None,
                   tolerance: Optional[float] = None) -> LieCheck:
    """
    (i) g_lambda([Z, X]_m, X) = 0 and (iii) g_lambda(mixed bracket, X) = 0 for
    basis Z in m, X in n or p; t_1 is alternating; sum_i T(Z, v_i, v_i) = 0 on
    the model frame. With a model and point, (ii) is evaluated on its curvature.
    """
    detail: Dict[str, object] = {}
    first, third, torsion_sum, pairing = 0.0, 0.0, 0.0, 0.0
    curvature = curvature_function(model, point) if model is not None else None
    for lam in lambdas:
        first = max(first, float(np.max(np.abs(np.einsum("abb->ab", t_tensor(lam))))))
        third = max(third, float(np.max(np.abs(np.einsum("abb->ab", _pair_with_basis(lam, MIXED))))))
        T = torsion_tensor(lam, curvature)
        for theta in THETA_SAMPLES[:4]:
            coords, outside = _frame_coordinates(lam, theta)
            sums = np.einsum("zbc,vb,vc->z", T, coords, coords)
            torsion_sum = max(torsion_sum, outside, float(np.max(np.abs(sums))))
        if model is not None:
            pairing = max(pairing, curvature_pairing_defect(model, point, lam)[0])
    t1 = t_tensor(1.0)
    alternating = max(float(np.max(np.abs(t1 + t1.swapaxes(0, 1)))), float(np.max(np.abs(t1 + t1.swapaxes(1, 2)))))
    detail.update({"(i)": first, "(iii)": third, "t1_alternating": alternating, "torsion_sum": torsion_sum})
    if model is not None:
        detail["(ii)"] = pairing
        detail["model"] = model.name
    residual = max(first, third, alternating, torsion_sum, pairing)
    return LieCheck("lemma_A", residual, _tol(tolerance), detail)


def check_A_formula(lambdas: Sequence[float] = store.DEFAULT_LAMBDAS, tolerance: Optional[float] = None) -> LieCheck:
    """A is skew in its last two slots and sum_i A(v_i, v_i) = sum_i T(., v_i, v_i) = 0 on the model frame"""
    skew, cancellation = 0.0, 0.0
    for lam in lambdas:
        T = torsion_tensor(lam)
        A = connection_tensor(T)
        skew = max(skew, float(np.max(np.abs(A + A.swapaxes(1, 2)))))
        coords, outside = _frame_coordinates(lam, 0.0)
        lhs = np.einsum("abz,va,vb->z", A, coords, coords)
        rhs = np.einsum("zbc,vb,vc->z", T, coords, coords)
        cancellation = max(cancellation, outside, float(np.max(np.abs(lhs - rhs))), float(np.max(np.abs(lhs))))
    zero_case = float(np.max(np.abs(connection_tensor(np.zeros((3, 3, 3))))))
    return LieCheck(
        "A_formula", max(skew, cancellation, zero_case), _tol(tolerance),
        {"skew": skew, "cancellation": cancellation},
    )


# ---------------------------------------------------------------------------
# Equator stabilizer and the Kirillov-Kostant-Souriau form
# ---------------------------------------------------------------------------

def check_equator_stabilizer(thetas: Sequence[float] = THETA_SAMPLES, tolerance: Optional[float] = None) -> LieCheck:
    """The A in so(4) moving every equator point along the equator form u(2)"""
    identity = np.eye(4)
    blocks = [b[:4, :4] for b in SO4_BASIS]
    rows = []
    for theta in thetas:
        J = equator_J(identity, theta)
        tangent = equator_J(identity, theta + 0.5 * np.pi)
        columns = []
        for a in blocks:
            action = bracket(a, J)
            along = float(np.sum(action * tangent)) / float(np.sum(tangent * tangent))
            columns.append((action - along * tangent).reshape(-1))
        rows.append(np.column_stack(columns))
    solutions = null_space(np.vstack(rows))
    stabilizer = [embed(np.einsum("k,kij->ij", c, np.array(blocks))) for c in solutions.T]
    commutator = max((float(np.max(np.abs(bracket(s, J0)))) for s in stabilizer), default=1.0)
    combined = np.column_stack([e.reshape(-1) for e in list(stabilizer) + list(U2_BASIS)])
    rank = int(np.linalg.matrix_rank(combined, tol=1e-10))
    residual = max(commutator, float(abs(len(stabilizer) - 4)), float(abs(rank - 4)))
    return LieCheck("equator_stabilizer", residual, _tol(tolerance), {"dimension": len(stabilizer), "joint_rank": rank})


def check_kks_form(tolerance: Optional[float] = None) -> LieCheck:
    """X, Y -> g_K([z, X], Y) with z = J0 / 2 is alternating and nondegenerate on m"""
    z = 0.5 * J0
    form = gram(lambda a, b: g_kahler(bracket(z, a), b))
    antisymmetry = float(np.max(np.abs(form + form.T)))
    smallest = float(np.linalg.svd(form, compute_uv=False)[-1])
    residual = max(antisymmetry, 0.0 if smallest > 1e-8 else 1.0)
    return LieCheck("kks_form", residual, _tol(tolerance), {"smallest_singular_value": smallest})


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------

def run_lie_suite(lambdas: Sequence[float] = store.DEFAULT_LAMBDAS, tolerance: Optional[float] = None) -> List[LieCheck]:
    checks = [check_decomposition(tolerance), check_killing_invariance(tolerance)]
    checks += [check_metric_family(lam, tolerance) for lam in lambdas]
    checks.append(check_B_theta(tolerance=tolerance))
    checks += [check_v3_normalization(lam, tolerance) for lam in lambdas]
    checks.append(check_bracket_grading(tolerance))
    checks.append(verify_lemma_A(lambdas, tolerance=tolerance))
    checks.append(check_A_formula(lambdas, tolerance))
    checks.append(check_equator_stabilizer(tolerance=tolerance))
    checks.append(check_kks_form(tolerance))
    for check in checks:
        logger.info(f"[LIE] {check.name}: residual={check.residual:.3e} {'pass' if check.passed else 'FAIL'}")
    return checks
