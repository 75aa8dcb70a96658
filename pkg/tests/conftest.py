"""
Shared pytest fixtures for the twistorkit tests.

Key responsibilities:
- Pin the sweep settings BEFORE store.py is imported (it reads the
  environment once at import time).
- Provide the three model manifolds and small corpus surfaces/lifts that
  several test modules share; grids are kept coarse so the suite stays fast.
"""
import os

# ---------------------------------------------------------------------------
# 1. Environment variables: set before any project module is loaded
# ---------------------------------------------------------------------------
os.environ.setdefault("TWISTORKIT_THREADS", "1")
os.environ.setdefault("TWISTORKIT_LOG_LEVEL", "WARNING")

# ---------------------------------------------------------------------------
# 2. Pytest fixtures
# ---------------------------------------------------------------------------
import pytest

from services.geometry import ManifoldModel, ModelKind

SUPERMINIMAL = ("plane_r4", "graph_z2", "sphere_tg", "cp1_line", "veronese")
NEGATIVE = ("clifford", "graph_parab")


@pytest.fixture(scope="session")
def flat():
    return ManifoldModel(ModelKind.FLAT_R4)


@pytest.fixture(scope="session")
def sphere():
    return ManifoldModel(ModelKind.ROUND_S4)


@pytest.fixture(scope="session")
def cp2():
    return ManifoldModel(ModelKind.FUBINI_STUDY_CP2)


@pytest.fixture(scope="session", params=list(ModelKind), ids=[k.value for k in ModelKind])
def any_model(request):
    return ManifoldModel(request.param)


@pytest.fixture(scope="session")
def corpus_surface():
    """Factory: corpus_surface(name, grid=(5, 5)) -> ImmersedSurface"""
    from services.corpus import corpus_surface as build

    def _build(name, grid=(5, 5)):
        return build(name, grid)
    return _build


@pytest.fixture(scope="session")
def lift():
    """Factory with a per-session cache: lift(name, grid=(5, 5), n_theta=8) -> LagrangianPatch"""
    from services.corpus import corpus_surface as build
    from services.lagrangian import build_lift

    cache = {}

    def _lift(name, grid=(5, 5), n_theta=8):
        key = (name, grid, n_theta)
        if key not in cache:
            cache[key] = build_lift(build(name, grid), n_theta)
        return cache[key]
    return _lift
