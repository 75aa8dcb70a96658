"""
Built-in surfaces with their expected classification.

Each entry is kept as formula text so it goes through the same parser a
scenario file would use.
"""

import logging
from typing import Dict, List, Optional, Tuple

from errors import ConfigError
from models import CorpusEntry, SurfaceSpec
from services.geometry import ManifoldModel
from services.surfaces import Domain, FormulaMap, ImmersedSurface

logger = logging.getLogger(__name__)

_UNIT = (-0.5, 0.5, -0.5, 0.5)

CORPUS: Dict[str, CorpusEntry] = {
    entry.name: entry
    for entry in [
        CorpusEntry(
            name="plane_r4",
            model="FlatR4",
            formulas=["u", "v", "0", "0"],
            domain=(-1.0, 1.0, -1.0, 1.0),
            expected="superminimal",
            provenance="constant adapted frame, second fundamental form zero",
        ),
        CorpusEntry(
            name="graph_z2",
            model="FlatR4",
            formulas=["u", "v", "u^2 - v^2", "2*u*v"],
            domain=_UNIT,
            expected="superminimal",
            provenance="graph of w = z^2, a complex curve; J0 is the constant complex structure",
        ),
        CorpusEntry(
            name="graph_zbar2",
            model="FlatR4",
            formulas=["u", "v", "u^2 - v^2", "-2*u*v"],
            domain=_UNIT,
            expected="minimal-not-superminimal",
            provenance="graph of w = conj(z)^2; curvature ellipse a centred circle traversed backwards",
        ),
        CorpusEntry(
            name="graph_parab",
            model="FlatR4",
            formulas=["u", "v", "u^2", "0"],
            domain=_UNIT,
            expected="non-minimal",
            provenance="mean curvature 2/(1+4u^2)^(3/2) along the first normal",
        ),
        CorpusEntry(
            name="sphere_tg",
            model="RoundS4",
            formulas=["u", "v", "0", "0"],
            domain=_UNIT,
            expected="superminimal",
            provenance="coordinate plane through the origin of the stereographic chart: a great 2-sphere, totally geodesic",
        ),
        CorpusEntry(
            name="clifford",
            model="RoundS4",
            formulas=["cos(u)/sqrt(2)", "sin(u)/sqrt(2)", "cos(v)/sqrt(2)", "sin(v)/sqrt(2)"],
            domain=(0.0, 3.0, 0.0, 3.0),
            expected="minimal-not-superminimal",
            provenance="Clifford torus in a totally geodesic 3-sphere; curvature ellipse a segment of half-length 1",
        ),
        CorpusEntry(
            name="cp1_line",
            model="FubiniStudyCP2",
            formulas=["u", "v", "0", "0"],
            domain=_UNIT,
            expected="superminimal",
            provenance="projective line z2 = 0, totally geodesic complex curve",
        ),
        CorpusEntry(
            name="veronese",
            model="FubiniStudyCP2",
            formulas=["sqrt(2)*u", "sqrt(2)*v", "u^2 - v^2", "2*u*v"],
            domain=_UNIT,
            expected="superminimal",
            provenance="conic [1 : sqrt(2) z : z^2] in the affine chart; complex curve, J0 is the parallel Kahler structure",
        ),
    ]
}


def list_corpus() -> List[CorpusEntry]:
    return list(CORPUS.values())


def corpus_entry(name: str) -> CorpusEntry:
    try:
        return CORPUS[name]
    except KeyError:
        raise ConfigError(f"Unknown corpus surface '{name}' (known: {', '.join(CORPUS)})")


def build_surface(
    model: str,
    formulas: List[str],
    domain: Tuple[float, float, float, float],
    grid: Tuple[int, int],
    name: str = "custom",
) -> ImmersedSurface:
    """Parse the formulas and assemble an ImmersedSurface; parse errors carry offsets"""
    return ImmersedSurface(
        model=ManifoldModel.named(model),
        chart_map=FormulaMap.from_sources(formulas),
        domain=Domain(*domain),
        grid=tuple(grid),
        name=name,
    )


def corpus_surface(name: str, grid: Optional[Tuple[int, int]] = None) -> ImmersedSurface:
    entry = corpus_entry(name)
    return build_surface(entry.model, entry.formulas, entry.domain, grid or entry.grid, entry.name)


def surface_from_spec(spec: SurfaceSpec, model: str, grid: Optional[Tuple[int, int]] = None) -> ImmersedSurface:
    return build_surface(model, spec.formulas, spec.domain, grid or spec.grid, spec.name)
