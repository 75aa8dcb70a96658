import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

import store
from errors import RankDeficientError, TransportError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MIN_STEP = 1e-12


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def central_difference(f: Callable[[np.ndarray], Any], x: np.ndarray, h: float) -> np.ndarray:
    """Central differences of an array-valued f; the derivative index comes first"""
    x = np.asarray(x, dtype=float)
    columns = []
    for k in range(x.size):
        step = np.zeros_like(x)
        step[k] = h
        columns.append((np.asarray(f(x + step), dtype=float) - np.asarray(f(x - step), dtype=float)) / (2.0 * h))
    return np.stack(columns)


def second_differences(f: Callable[[np.ndarray], Any], x: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """First and second central differences; returns (df[a], d2f[a, b])"""
    x = np.asarray(x, dtype=float)
    n = x.size
    f0 = np.asarray(f(x), dtype=float)
    basis = np.eye(n) * h
    plus = [np.asarray(f(x + basis[a]), dtype=float) for a in range(n)]
    minus = [np.asarray(f(x - basis[a]), dtype=float) for a in range(n)]
    first = np.stack([(plus[a] - minus[a]) / (2.0 * h) for a in range(n)])
    second = np.zeros((n, n) + f0.shape)
    for a in range(n):
        second[a, a] = (plus[a] - 2.0 * f0 + minus[a]) / h ** 2
        for b in range(a + 1, n):
            pp = np.asarray(f(x + basis[a] + basis[b]), dtype=float)
            pm = np.asarray(f(x + basis[a] - basis[b]), dtype=float)
            mp = np.asarray(f(x - basis[a] + basis[b]), dtype=float)
            mm = np.asarray(f(x - basis[a] - basis[b]), dtype=float)
            second[a, b] = second[b, a] = (pp - pm - mp + mm) / (4.0 * h ** 2)
    return first, second


def levi_civita(metric: np.ndarray, metric_derivative: np.ndarray) -> np.ndarray:
    """Christoffel symbols Gamma[k, i, j] from g and dg[k, i, j] = d_k g_ij"""
    inv_g = np.linalg.inv(metric)
    lowered = (
        np.einsum("ilj->lij", metric_derivative)
        + np.einsum("jli->lij", metric_derivative)
        - metric_derivative
    )
    return 0.5 * np.einsum("kl,lij->kij", inv_g, lowered)


# ---------------------------------------------------------------------------
# ODE integration
# ---------------------------------------------------------------------------

def rk4_integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t0: float,
    t1: float,
    steps: int,
    on_step: Optional[Callable[[float, np.ndarray], None]] = None,
) -> np.ndarray:
    """Fixed-step classical Runge-Kutta from t0 to t1"""
    if steps < 1:
        raise TransportError(f"RK4 needs at least one step, got {steps}")
    dt = (t1 - t0) / steps
    if abs(dt) < MIN_STEP:
        raise TransportError(f"Step size underflow: dt={dt:.3e}")
    y = np.array(y0, dtype=float)
    for n in range(steps):
        t = t0 + n * dt
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise TransportError(f"Integration diverged at t={t + dt:.6f}")
        if on_step is not None:
            on_step(t0 + (n + 1) * dt, y)
    return y


# ---------------------------------------------------------------------------
# Linear algebra helpers
# ---------------------------------------------------------------------------

def g_inner(metric: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ metric @ b)


def g_norm(metric: np.ndarray, a: np.ndarray) -> float:
    return float(np.sqrt(max(a @ metric @ a, 0.0)))


def gram_schmidt(vectors: np.ndarray, metric: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Orthonormalize the columns of `vectors` in the bilinear form `metric`"""
    basis: List[np.ndarray] = []
    for index in range(vectors.shape[1]):
        w = np.array(vectors[:, index], dtype=float)
        for b in basis:
            w = w - g_inner(metric, b, w) * b
        norm = g_norm(metric, w)
        if norm <= tol:
            raise RankDeficientError(f"Vector {index} is dependent on its predecessors (residual {norm:.3e})")
        basis.append(w / norm)
    return np.column_stack(basis)


def orthonormality_defect(frame: np.ndarray, metric: np.ndarray) -> float:
    """max |<f_i, f_j>_g - delta_ij| over the columns of frame"""
    gram = frame.T @ metric @ frame
    return float(np.max(np.abs(gram - np.eye(frame.shape[1]))))


def operator_norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, 2))


def numerical_rank(matrix: np.ndarray, rel_tol: float = 1e-6) -> int:
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular.size == 0 or singular[0] == 0.0:
        return 0
    return int(np.sum(singular > rel_tol * max(singular[0], 1.0)))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def sweep(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Map fn over items, in input order, on up to `threads` workers"""
    items = list(items)
    workers = store.THREADS if threads is None else max(1, threads)
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def running_max(pairs: Iterable[Tuple[float, Any]]) -> Tuple[float, Any]:
    """Largest value with its location; ties keep the first in index order"""
    best_value, best_where = 0.0, None
    for value, where in pairs:
        if best_where is None or value > best_value:
            best_value, best_where = float(value), where
    return best_value, best_where


def stable_rank_order(scores: Sequence[float]) -> Tuple[int, ...]:
    """Indices sorted by descending score, ties in index order"""
    return tuple(sorted(range(len(scores)), key=lambda i: -scores[i]))
