import itertools
import logging
from typing import Callable, Optional

import numpy as np

from app.config import Settings
from app.core.models.geometry import Chart, ChartKind, Covector, Point, TangentVector
from app.core.models.hamiltonian import (
    CentralPotential,
    ContactDamped,
    Polynomial,
    PolynomialTerm,
    PotentialKind,
    PotentialSpec,
    RadialKind,
    RadialPotentialSpec,
    ScalarField,
    SeparableMechanical,
    TranslationInvariant,
)
from app.core.services.geometry_service import GeometryService
from app.core.utils.exceptions import ChartMismatchError, NumericalError, ValidationException

logger = logging.getLogger(__name__)

ArrayField = Callable[[np.ndarray], np.ndarray]


class HamiltonianVectorField:
    """X_H as a callable on Points, with an array fast path for the integrators."""

    def __init__(self, service: "HamiltonianService", H: ScalarField):
        self.service = service
        self.H = H
        self.chart = H.chart

    def array(self, x: np.ndarray) -> np.ndarray:
        return self.service.xh_array(self.H, x)

    def __call__(self, pt: Point) -> TangentVector:
        return TangentVector(base=pt, components=self.array(pt.coords))


class HamiltonianService:
    """Hamiltonians, their gradients and Hamiltonian vector fields (symplectic and contact)."""

    def __init__(self, settings: Settings, geometry: GeometryService):
        self.settings = settings
        self.geometry = geometry
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------
    # Building fields
    # ------------------------------------------------------------------

    def scalar(
        self,
        chart: Chart,
        function: Callable[[np.ndarray], float],
        gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        name: str = "H"
    ) -> ScalarField:
        return ScalarField(chart=chart, name=name, function=function, gradient=gradient)

    def build(self, spec, chart: Chart) -> ScalarField:
        """Compile a builtin Hamiltonian spec on a chart."""
        if chart.kind == ChartKind.SYMPLECTIFIED:
            raise ChartMismatchError("Hamiltonians live on symplectic or contact charts", details={"chart": chart.label()})

        if isinstance(spec, ContactDamped):
            if chart.kind != ChartKind.CONTACT:
                raise ChartMismatchError("contact_damped needs a contact chart", details={"chart": chart.label()})
            z = chart.z_index
            dz = np.zeros(chart.dim)
            dz[z] = 1.0
            z_field = self.scalar(chart, lambda x: x[z], lambda x: dz.copy(), name="z")
            damped = self.build(spec.base, chart) + float(spec.gamma) * z_field
            return damped.model_copy(update={"name": "contact_damped", "spec": spec})

        if isinstance(spec, SeparableMechanical):
            return self._build_mechanical(spec, chart)
        if isinstance(spec, CentralPotential):
            return self._build_central(spec, chart)
        if isinstance(spec, TranslationInvariant):
            return self._build_translation_invariant(spec, chart)
        if isinstance(spec, Polynomial):
            return self._build_polynomial(spec, chart)

        raise ValidationException(f"Unsupported Hamiltonian spec: {type(spec).__name__}")

    def _potential(self, potential: PotentialSpec, n: int):
        indices = np.arange(n) if potential.indices is None else np.asarray(potential.indices, dtype=int)
        if indices.size and (indices.min() < 0 or indices.max() >= n):
            raise ValidationException(
                f"Potential indices {potential.indices} out of range for n={n}",
                details={"indices": potential.indices, "n": n}
            )
        k = float(potential.stiffness)
        kind = PotentialKind(potential.kind)

        def U(q: np.ndarray) -> float:
            s = q[indices]
            if kind == PotentialKind.HARMONIC:
                return 0.5 * k * float(np.dot(s, s))
            if kind == PotentialKind.QUARTIC:
                return 0.25 * k * float(np.sum(s ** 4))
            if kind == PotentialKind.DOUBLE_WELL:
                return k * float(np.sum((s ** 2 - 1.0) ** 2))
            return 0.0

        def dU(q: np.ndarray) -> np.ndarray:
            out = np.zeros(n)
            s = q[indices]
            if kind == PotentialKind.HARMONIC:
                out[indices] = k * s
            elif kind == PotentialKind.QUARTIC:
                out[indices] = k * s ** 3
            elif kind == PotentialKind.DOUBLE_WELL:
                out[indices] = 4.0 * k * s * (s ** 2 - 1.0)
            return out

        return U, dU

    def _build_mechanical(self, spec: SeparableMechanical, chart: Chart) -> ScalarField:
        n, m = chart.n, float(spec.mass)
        U, dU = self._potential(spec.potential, n)
        dim = chart.dim

        def value(x: np.ndarray) -> float:
            p = x[n:2 * n]
            return float(np.dot(p, p)) / (2.0 * m) + U(x[:n])

        def gradient(x: np.ndarray) -> np.ndarray:
            out = np.zeros(dim)
            out[:n] = dU(x[:n])
            out[n:2 * n] = x[n:2 * n] / m
            return out

        return ScalarField(chart=chart, name="separable_mechanical", function=value, gradient=gradient, spec=spec)

    def radial_profile(self, radial: RadialPotentialSpec):
        """Return (U(r), U'(r)) for a radial spec."""
        k, a = float(radial.strength), float(radial.exponent)
        kind = RadialKind(radial.kind)

        if kind == RadialKind.KEPLER:
            return (lambda r: -k / r), (lambda r: k / r ** 2)
        if kind == RadialKind.HARMONIC:
            return (lambda r: 0.5 * k * r ** 2), (lambda r: k * r)
        return (lambda r: k * r ** a / a), (lambda r: k * r ** (a - 1.0))

    def _build_central(self, spec: CentralPotential, chart: Chart) -> ScalarField:
        n, m = chart.n, float(spec.mass)
        U, dU = self.radial_profile(spec.radial)
        dim = chart.dim
        min_radius = self.settings.min_radius

        def radius(q: np.ndarray) -> float:
            r = float(np.linalg.norm(q))
            if r < min_radius:
                raise NumericalError("Central potential evaluated at the origin", details={"r": r})
            return r

        def value(x: np.ndarray) -> float:
            p = x[n:2 * n]
            return float(np.dot(p, p)) / (2.0 * m) + U(radius(x[:n]))

        def gradient(x: np.ndarray) -> np.ndarray:
            q = x[:n]
            r = radius(q)
            out = np.zeros(dim)
            out[:n] = dU(r) * q / r
            out[n:2 * n] = x[n:2 * n] / m
            return out

        return ScalarField(chart=chart, name="central_potential", function=value, gradient=gradient, spec=spec)

    def _build_translation_invariant(self, spec: TranslationInvariant, chart: Chart) -> ScalarField:
        n, m = chart.n, float(spec.mass)
        c = np.zeros(n) if not spec.drift else np.asarray(spec.drift, dtype=np.float64)
        if c.shape[0] != n:
            raise ValidationException(
                f"drift has length {c.shape[0]}, expected {n}",
                details={"expected": n, "found": int(c.shape[0])}
            )
        dim = chart.dim

        def value(x: np.ndarray) -> float:
            p = x[n:2 * n]
            return float(np.dot(p, p)) / (2.0 * m) + float(np.dot(c, p))

        def gradient(x: np.ndarray) -> np.ndarray:
            out = np.zeros(dim)
            out[n:2 * n] = x[n:2 * n] / m + c
            return out

        return ScalarField(chart=chart, name="translation_invariant", function=value, gradient=gradient, spec=spec)

    def _build_polynomial(self, spec: Polynomial, chart: Chart) -> ScalarField:
        dim = chart.dim
        if not spec.terms:
            return self.scalar(chart, lambda x: 0.0, lambda x: np.zeros(dim), name="polynomial")
        E = np.asarray([t.exponents for t in spec.terms], dtype=int)
        if E.shape[1] != dim or np.any(E < 0):
            raise ValidationException(
                f"Polynomial exponents must be non-negative with length {dim}",
                details={"expected": dim, "found": int(E.shape[1])}
            )
        c = np.asarray([t.coefficient for t in spec.terms], dtype=np.float64)

        def value(x: np.ndarray) -> float:
            return float(np.dot(c, np.prod(x ** E, axis=1)))

        def gradient(x: np.ndarray) -> np.ndarray:
            out = np.empty(dim)
            for j in range(dim):
                lowered = E.copy()
                lowered[:, j] = np.maximum(lowered[:, j] - 1, 0)
                out[j] = float(np.dot(c * E[:, j], np.prod(x ** lowered, axis=1)))
            return out

        return ScalarField(chart=chart, name="polynomial", function=value, gradient=gradient, spec=spec)

    def random_polynomial(self, chart: Chart, degree: int, rng: np.random.Generator, scale: float = 1.0) -> ScalarField:
        """All monomials up to `degree` with normal coefficients."""
        terms = []
        for d in range(degree + 1):
            for combo in itertools.combinations_with_replacement(range(chart.dim), d):
                exponents = np.bincount(np.asarray(combo, dtype=int), minlength=chart.dim).tolist()
                terms.append(PolynomialTerm(coefficient=float(scale * rng.standard_normal()), exponents=exponents))
        return self._build_polynomial(Polynomial(terms=terms), chart)

    # ------------------------------------------------------------------
    # Gradients
    # ------------------------------------------------------------------

    def fd_steps(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(self.settings.fd_min_step, self.settings.fd_relative_step * np.abs(x))

    def grad_array(self, H: ScalarField, x: np.ndarray) -> np.ndarray:
        if H.gradient is not None:
            g = np.asarray(H.gradient(x), dtype=np.float64)
        else:
            h = self.fd_steps(x)
            g = np.empty_like(x, dtype=np.float64)
            for i in range(x.shape[0]):
                e = np.zeros_like(x, dtype=np.float64)
                e[i] = h[i]
                g[i] = (H.function(x + e) - H.function(x - e)) / (2.0 * h[i])
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"Non-finite gradient of {H.name}", details={"point": x.tolist()})
        return g

    def grad(self, H: ScalarField, pt: Point) -> Covector:
        self._require_chart(H, pt)
        return Covector(base=pt, components=self.grad_array(H, pt.coords))

    def _require_chart(self, H: ScalarField, pt: Point) -> None:
        if H.chart != pt.chart:
            raise ChartMismatchError(
                f"{H.name} lives on {H.chart.label()}, point on {pt.chart.label()}",
                details={"field_chart": H.chart.label(), "point_chart": pt.chart.label()}
            )

    # ------------------------------------------------------------------
    # Hamiltonian vector fields
    # ------------------------------------------------------------------

    def xh_array(self, H: ScalarField, x: np.ndarray) -> np.ndarray:
        """X_H at raw coordinates, using the formula of the field's chart kind."""
        n = H.chart.n
        g = self.grad_array(H, x)
        X = np.empty_like(g)
        X[:n] = g[n:2 * n]
        if H.chart.kind == ChartKind.SYMPLECTIC:
            X[n:2 * n] = -g[:n]
            return X
        p = x[n:2 * n]
        gz = g[2 * n]
        X[n:2 * n] = -(g[:n] + p * gz)
        X[2 * n] = float(np.dot(p, g[n:2 * n])) - H.value(x)
        return X

    def xh_symplectic(self, H: ScalarField, pt: Point) -> TangentVector:
        """X_H = ∂H/∂pᵢ ∂/∂qⁱ − ∂H/∂qⁱ ∂/∂pᵢ."""
        self._require_chart(H, pt)
        self.geometry._require(pt, ChartKind.SYMPLECTIC)
        return TangentVector(base=pt, components=self.xh_array(H, pt.coords))

    def xh_contact(self, H: ScalarField, pt: Point) -> TangentVector:
        """X_H = H_p ∂_q − (H_q + p H_z) ∂_p + (p·H_p − H) ∂_z."""
        self._require_chart(H, pt)
        self.geometry._require(pt, ChartKind.CONTACT)
        return TangentVector(base=pt, components=self.xh_array(H, pt.coords))

    def vector_field(self, H: ScalarField) -> HamiltonianVectorField:
        if H.chart.kind == ChartKind.SYMPLECTIFIED:
            raise ChartMismatchError("No Hamiltonian dynamics on symplectified charts", details={"chart": H.chart.label()})
        return HamiltonianVectorField(self, H)

    def dissipation_rate(self, H: ScalarField, pt: Point) -> float:
        """𝓛_{X_H}H = −𝓡(H)·H."""
        self._require_chart(H, pt)
        self.geometry._require(pt, ChartKind.CONTACT)
        g = self.grad_array(H, pt.coords)
        return -H.evaluate(pt) * float(g[pt.chart.z_index])

    def jacobian_array(self, field: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: Optional[float] = None) -> np.ndarray:
        """Central-difference Jacobian DX(x), column j = ∂X/∂xⱼ."""
        h = self.settings.jacobian_step if step is None else step
        dim = x.shape[0]
        J = np.empty((np.atleast_1d(field(x)).shape[0], dim))
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = h
            J[:, j] = (field(x + e) - field(x - e)) / (2.0 * h)
        if not np.all(np.isfinite(J)):
            raise NumericalError("Non-finite vector field Jacobian", details={"point": x.tolist()})
        return J

    def _divergence(self, H: ScalarField, x: np.ndarray) -> float:
        h = self.settings.jacobian_step
        total = 0.0
        for j in range(x.shape[0]):
            e = np.zeros_like(x, dtype=np.float64)
            e[j] = h
            total += (self.xh_array(H, x + e)[j] - self.xh_array(H, x - e)[j]) / (2.0 * h)
        if not np.isfinite(total):
            raise NumericalError("Non-finite divergence", details={"point": x.tolist()})
        return float(total)

    def divergence_contact(self, H: ScalarField, pt: Point) -> float:
        """Trace of DX_H; equals −(n+1)∂H/∂z for the Darboux volume."""
        self._require_chart(H, pt)
        self.geometry._require(pt, ChartKind.CONTACT)
        return self._divergence(H, pt.coords)

    def divergence_symplectic(self, H: ScalarField, pt: Point) -> float:
        """Trace of DX_H on a symplectic chart (Liouville: zero)."""
        self._require_chart(H, pt)
        self.geometry._require(pt, ChartKind.SYMPLECTIC)
        return self._divergence(H, pt.coords)
