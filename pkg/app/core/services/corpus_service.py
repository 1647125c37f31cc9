"""
Built-in submanifold corpus of contact charts.

Each entry samples points of N together with a basis of T_xN. The corpus is
shared by the `classify` and `symplectify` commands and by the
Legendrian/Lagrangian agreement check.
"""
import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from app.config import Settings
from app.core.models.geometry import Chart, ChartKind, CorpusEntry, SubmanifoldType, SubspaceBasis
from app.core.services.geometry_service import GeometryService
from app.core.utils.exceptions import ValidationException

logger = logging.getLogger(__name__)

Sampler = Callable[[np.random.Generator], Tuple[np.ndarray, np.ndarray]]


def _zero_section(n: int) -> Sampler:
    """{p = 0, z = 0}, T_xN = span{∂q}."""
    def sample(rng: np.random.Generator):
        x = np.zeros(2 * n + 1)
        x[:n] = rng.standard_normal(n)
        V = np.zeros((2 * n + 1, n))
        V[:n, :n] = np.eye(n)
        return x, V
    return sample


def _one_jet_graph(rng: np.random.Generator):
    """j¹f = {p = f'(q), z = f(q)} for f(q) = sin q + q²/4."""
    q = rng.uniform(-2.0, 2.0)
    f, df, d2f = np.sin(q) + 0.25 * q * q, np.cos(q) + 0.5 * q, -np.sin(q) + 0.5
    return np.array([q, df, f]), np.array([[1.0], [d2f], [df]])


def _fiber_line(rng: np.random.Generator):
    """{q = 0, z = 0}, T_xN = span{∂p}."""
    return np.array([0.0, rng.standard_normal(), 0.0]), np.array([[0.0], [1.0], [0.0]])


def _vertical_coisotropic(rng: np.random.Generator):
    """{p = 0}, T_xN = span{∂q, ∂z}."""
    x = np.array([rng.standard_normal(), 0.0, rng.standard_normal()])
    return x, np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])


def _oblique_line(rng: np.random.Generator):
    """A curve tangent to ∂q + ∂z through generic points."""
    x = rng.standard_normal(3)
    # stay away from p = 1 where ∂q + ∂z becomes horizontal
    x[1] = 0.5 * np.tanh(x[1])
    return x, np.array([[1.0], [0.0], [1.0]])


def _mixed_legendrian(rng: np.random.Generator):
    """{p₁ = 0, q² = 0, z = 0} in n = 2, T_xN = span{∂q¹, ∂p₂}."""
    x = np.zeros(5)
    x[0] = rng.standard_normal()
    x[3] = rng.standard_normal()
    V = np.zeros((5, 2))
    V[0, 0] = 1.0
    V[3, 1] = 1.0
    return x, V


_CORPUS: List[Tuple[CorpusEntry, Sampler]] = [
    (CorpusEntry(name="zero_section_n1", n=1, description="{p=0, z=0}",
                 expected=SubmanifoldType.LEGENDRIAN, expected_lifted=SubmanifoldType.LAGRANGIAN), _zero_section(1)),
    (CorpusEntry(name="zero_section_n2", n=2, description="{p=0, z=0}",
                 expected=SubmanifoldType.LEGENDRIAN, expected_lifted=SubmanifoldType.LAGRANGIAN), _zero_section(2)),
    (CorpusEntry(name="one_jet_graph", n=1, description="1-jet of sin q + q²/4",
                 expected=SubmanifoldType.LEGENDRIAN, expected_lifted=SubmanifoldType.LAGRANGIAN), _one_jet_graph),
    (CorpusEntry(name="fiber_line", n=1, description="{q=0, z=0}",
                 expected=SubmanifoldType.LEGENDRIAN, expected_lifted=SubmanifoldType.LAGRANGIAN), _fiber_line),
    (CorpusEntry(name="mixed_legendrian_n2", n=2, description="{p1=0, q2=0, z=0}",
                 expected=SubmanifoldType.LEGENDRIAN, expected_lifted=SubmanifoldType.LAGRANGIAN), _mixed_legendrian),
    (CorpusEntry(name="vertical_coisotropic", n=1, description="{p=0}",
                 expected=SubmanifoldType.COISOTROPIC, expected_lifted=SubmanifoldType.COISOTROPIC), _vertical_coisotropic),
    (CorpusEntry(name="oblique_line", n=1, description="curve tangent to ∂q + ∂z",
                 expected=SubmanifoldType.NONE, expected_lifted=SubmanifoldType.SYMPLECTIC), _oblique_line),
]


class CorpusService:
    """Access to the built-in submanifold corpus."""

    def __init__(self, settings: Settings, geometry: GeometryService):
        self.settings = settings
        self.geometry = geometry
        self.logger = logging.getLogger(__name__)
        self._samplers: Dict[str, Tuple[CorpusEntry, Sampler]] = {e.name: (e, s) for e, s in _CORPUS}

    def entries(self) -> List[CorpusEntry]:
        return [entry for entry, _ in _CORPUS]

    def names(self) -> List[str]:
        return list(self._samplers.keys())

    def get(self, name: str) -> CorpusEntry:
        if name not in self._samplers:
            raise ValidationException(
                f"Unknown corpus submanifold '{name}'",
                details={"supported": self.names()}
            )
        return self._samplers[name][0]

    def chart(self, name: str) -> Chart:
        return Chart(kind=ChartKind.CONTACT, n=self.get(name).n)

    def samples(self, name: str, rng: np.random.Generator, count: Optional[int] = None) -> List[SubspaceBasis]:
        """`count` tangent spaces T_xN at sampled points of N."""
        entry = self.get(name)
        sampler = self._samplers[name][1]
        chart = Chart(kind=ChartKind.CONTACT, n=entry.n)
        count = 100 if count is None else count
        out = []
        for _ in range(count):
            x, V = sampler(rng)
            pt = self.geometry.point(chart, x)
            out.append(self.geometry.basis(pt, [V[:, j] for j in range(V.shape[1])]))
        self.logger.debug(f"Sampled {count} tangent spaces of {name}")
        return out
