import logging
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from app.config import Settings
from app.core.models.geometry import (
    Chart,
    ChartKind,
    ClassificationResult,
    Covector,
    Point,
    PointPosition,
    SubmanifoldType,
    SubspaceBasis,
    TangentVector,
)
from app.core.utils.exceptions import ChartMismatchError, GeometryError

logger = logging.getLogger(__name__)

VectorLike = Union[TangentVector, Sequence[float], np.ndarray]


@lru_cache(maxsize=64)
def _pairing_matrix(n: int, dim: int) -> np.ndarray:
    """Matrix W of Σ dqⁱ∧dpᵢ padded to `dim`, so that dη(u, v) = uᵀ W v."""
    W = np.zeros((dim, dim))
    idx = np.arange(n)
    W[idx, n + idx] = 1.0
    W[n + idx, idx] = -1.0
    W.setflags(write=False)
    return W


def pairing_matrix(chart: Chart) -> np.ndarray:
    return _pairing_matrix(chart.n, chart.dim)


def eta_array(chart: Chart, x: np.ndarray) -> np.ndarray:
    """Components of η = dz − pᵢdqⁱ at x (contact layout, or the base block of a symplectified point)."""
    n = chart.n
    eta = np.zeros(chart.dim)
    eta[:n] = -x[n:2 * n]
    eta[2 * n] = 1.0
    return eta


class GeometryService:
    """Structural tensors, musical isomorphisms and subspace classification in Darboux charts."""

    def __init__(self, settings: Settings):
        self.settings = settings
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------

    def point(self, chart: Chart, coords: Sequence[float]) -> Point:
        return Point(chart=chart, coords=coords)

    def vector(self, pt: Point, components: Sequence[float]) -> TangentVector:
        return TangentVector(base=pt, components=components)

    def covector(self, pt: Point, components: Sequence[float]) -> Covector:
        return Covector(base=pt, components=components)

    def coordinate_vector(self, pt: Point, index: int) -> TangentVector:
        e = np.zeros(pt.chart.dim)
        e[index] = 1.0
        return self.vector(pt, e)

    def basis(self, pt: Point, vectors: Iterable[VectorLike]) -> SubspaceBasis:
        """Validated basis: the vectors must be independent after normalization."""
        tangents = [self._as_tangent(pt, v) for v in vectors]
        basis = SubspaceBasis(base=pt, vectors=tangents)
        self._check_independent(basis)
        return basis

    def span(self, pt: Point, matrix: np.ndarray) -> SubspaceBasis:
        """Orthonormal basis of the column space of `matrix` (dependent columns allowed)."""
        A = np.asarray(matrix, dtype=np.float64)
        Q = self._column_space(A if A.ndim == 2 else A.reshape(pt.chart.dim, -1))
        return SubspaceBasis(
            base=pt,
            vectors=[TangentVector(base=pt, components=Q[:, j]) for j in range(Q.shape[1])]
        )

    def full_space(self, pt: Point) -> SubspaceBasis:
        return self.span(pt, np.eye(pt.chart.dim))

    def random_point(self, chart: Chart, rng: np.random.Generator, scale: float = 1.0) -> Point:
        return Point(chart=chart, coords=scale * rng.standard_normal(chart.dim))

    def random_vector(self, pt: Point, rng: np.random.Generator) -> TangentVector:
        return TangentVector(base=pt, components=rng.standard_normal(pt.chart.dim))

    def _as_tangent(self, pt: Point, v: VectorLike) -> TangentVector:
        if isinstance(v, TangentVector):
            self._require_based_at(pt, v)
            return v
        return TangentVector(base=pt, components=v)

    def _check_independent(self, basis: SubspaceBasis) -> None:
        if basis.rank == 0:
            return
        M = basis.matrix()
        norms = np.linalg.norm(M, axis=0)
        if np.any(norms == 0.0):
            raise GeometryError("Basis contains a zero vector", details={"rank": basis.rank})
        sigma = np.linalg.svd(M / norms, compute_uv=False)
        if sigma[-1] <= self.settings.independence_tol:
            raise GeometryError(
                "Basis vectors are linearly dependent",
                details={"smallest_singular_value": float(sigma[-1]), "rank": basis.rank}
            )

    def _column_space(self, A: np.ndarray) -> np.ndarray:
        if A.shape[1] == 0 or not np.any(A):
            return np.zeros((A.shape[0], 0))
        U, s, _ = np.linalg.svd(A, full_matrices=False)
        keep = s > self.settings.svd_cutoff
        return U[:, keep]

    def _null_space(self, M: np.ndarray, dim: int) -> np.ndarray:
        """Orthonormal basis (columns) of {v ∈ ℝ^dim : M v = 0}."""
        if M.shape[0] == 0:
            return np.eye(dim)
        return linalg.null_space(M, rcond=self.settings.svd_cutoff)

    # ------------------------------------------------------------------
    # Chart checks
    # ------------------------------------------------------------------

    def _require(self, pt: Point, *kinds: ChartKind) -> None:
        if pt.chart.kind not in kinds:
            raise ChartMismatchError(
                f"Operation needs a {' or '.join(k.value for k in kinds)} chart, got {pt.chart.label()}",
                details={"chart": pt.chart.label()}
            )

    def _require_based_at(self, pt: Point, *vectors: Union[TangentVector, Covector]) -> None:
        for v in vectors:
            if v.base.chart != pt.chart or not np.array_equal(v.base.coords, pt.coords):
                raise ChartMismatchError(
                    "Vector is not based at the given point",
                    details={"chart": pt.chart.label()}
                )

    # ------------------------------------------------------------------
    # Structural tensors
    # ------------------------------------------------------------------

    def eta(self, pt: Point, v: TangentVector) -> float:
        """η(v) = v_z − Σ pᵢ v_{qᵢ}."""
        self._require(pt, ChartKind.CONTACT)
        self._require_based_at(pt, v)
        return float(np.dot(eta_array(pt.chart, pt.coords), v.components))

    def eta_covector(self, pt: Point) -> Covector:
        self._require(pt, ChartKind.CONTACT)
        return Covector(base=pt, components=eta_array(pt.chart, pt.coords))

    def d_eta(self, pt: Point, u: TangentVector, v: TangentVector) -> float:
        """dη(u, v) = Σ (u_{qᵢ}v_{pᵢ} − u_{pᵢ}v_{qᵢ})."""
        self._require(pt, ChartKind.CONTACT)
        self._require_based_at(pt, u, v)
        return float(u.components @ pairing_matrix(pt.chart) @ v.components)

    def omega_symplectic(self, pt: Point, u: TangentVector, v: TangentVector) -> float:
        """ω(u, v) for ω = dqⁱ∧dpᵢ."""
        self._require(pt, ChartKind.SYMPLECTIC)
        self._require_based_at(pt, u, v)
        return float(u.components @ pairing_matrix(pt.chart) @ v.components)

    def liouville(self, pt: Point, v: TangentVector) -> float:
        """Liouville form λ = pᵢdqⁱ of T*ℝⁿ."""
        self._require(pt, ChartKind.SYMPLECTIC)
        self._require_based_at(pt, v)
        return float(np.dot(pt.p, v.components[pt.chart.q_slice]))

    def liouville_covector(self, pt: Point) -> Covector:
        self._require(pt, ChartKind.SYMPLECTIC)
        lam = np.zeros(pt.chart.dim)
        lam[pt.chart.q_slice] = pt.p
        return Covector(base=pt, components=lam)

    def exterior_derivative(self, one_form, pt: Point, step: Optional[float] = None) -> np.ndarray:
        """Matrix of dθ at pt by central differences, dθ(eᵢ, eⱼ) = ∂ᵢθⱼ − ∂ⱼθᵢ.

        `one_form` maps a Point to a Covector on the same chart.
        """
        h = self.settings.jacobian_step if step is None else step
        dim = pt.chart.dim
        D = np.empty((dim, dim))
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h
            plus = one_form(Point(chart=pt.chart, coords=pt.coords + e)).components
            minus = one_form(Point(chart=pt.chart, coords=pt.coords - e)).components
            D[i] = (plus - minus) / (2.0 * h)
        # D[i, j] = ∂ᵢθⱼ
        return D - D.T

    def reeb(self, pt: Point) -> TangentVector:
        self._require(pt, ChartKind.CONTACT)
        return self.coordinate_vector(pt, pt.chart.z_index)

    def gram_matrix(self, pt: Point) -> np.ndarray:
        """Matrix G of the chart's 2-form at pt: ω, dη or Ω = eᵗ(dη + dt∧η)."""
        chart = pt.chart
        W = np.array(pairing_matrix(chart))
        if chart.kind != ChartKind.SYMPLECTIFIED:
            return W
        t_idx = chart.t_index
        eta = eta_array(chart, pt.coords)[:t_idx]
        W[t_idx, :t_idx] = eta
        W[:t_idx, t_idx] = -eta
        return np.exp(pt.t) * W

    # ------------------------------------------------------------------
    # Musical isomorphisms
    # ------------------------------------------------------------------

    def flat_contact_matrix(self, pt: Point) -> np.ndarray:
        """Matrix of ♭(v) = i_v dη + η(v)η."""
        self._require(pt, ChartKind.CONTACT)
        eta = eta_array(pt.chart, pt.coords)
        return pairing_matrix(pt.chart).T + np.outer(eta, eta)

    def flat_contact(self, pt: Point, v: TangentVector) -> Covector:
        self._require_based_at(pt, v)
        return Covector(base=pt, components=self.flat_contact_matrix(pt) @ v.components)

    def sharp_contact(self, pt: Point, a: Covector) -> TangentVector:
        self._require_based_at(pt, a)
        F = self.flat_contact_matrix(pt)
        try:
            v = np.linalg.solve(F, a.components)
        except np.linalg.LinAlgError as e:
            raise GeometryError("Contact ♭ matrix is singular", details={"error": str(e)})
        residual = float(np.linalg.norm(F @ v - a.components)) / max(1.0, float(np.linalg.norm(a.components)))
        if residual > self.settings.sharp_residual_tol:
            raise GeometryError(
                "Contact ♯ solve did not converge",
                details={"residual": residual, "tolerance": self.settings.sharp_residual_tol}
            )
        return TangentVector(base=pt, components=v)

    def flat_symplectic(self, pt: Point, v: TangentVector) -> Covector:
        """♭(v) = i_v ω."""
        self._require(pt, ChartKind.SYMPLECTIC)
        self._require_based_at(pt, v)
        return Covector(base=pt, components=pairing_matrix(pt.chart).T @ v.components)

    def sharp_symplectic(self, pt: Point, a: Covector) -> TangentVector:
        """Closed-form Darboux inverse: ♯(dqⁱ) = −∂/∂pᵢ, ♯(dpᵢ) = ∂/∂qⁱ."""
        self._require(pt, ChartKind.SYMPLECTIC)
        self._require_based_at(pt, a)
        chart = pt.chart
        v = np.empty(chart.dim)
        v[chart.q_slice] = a.components[chart.p_slice]
        v[chart.p_slice] = -a.components[chart.q_slice]
        return TangentVector(base=pt, components=v)

    def sharp_lambda(self, pt: Point, a: Covector) -> TangentVector:
        """Jacobi morphism ♯_Λ(α) = ♯(α) − α(𝓡)𝓡."""
        self._require(pt, ChartKind.CONTACT)
        v = self.sharp_contact(pt, a).components.copy()
        v[pt.chart.z_index] -= a.components[pt.chart.z_index]
        return TangentVector(base=pt, components=v)

    # ------------------------------------------------------------------
    # Complements
    # ------------------------------------------------------------------

    def annihilator(self, B: SubspaceBasis) -> List[Covector]:
        """Orthonormal covectors spanning Δ° = {α | α(Δ) = 0}."""
        self._check_independent(B)
        pt = B.base
        if B.rank == 0:
            N = np.eye(pt.chart.dim)
        else:
            M = B.matrix()
            N = self._null_space((M / np.linalg.norm(M, axis=0)).T, pt.chart.dim)
        return [Covector(base=pt, components=N[:, j]) for j in range(N.shape[1])]

    def complement_omega(self, B: SubspaceBasis) -> SubspaceBasis:
        """Δ^⊥ = ♯(Δ°) with respect to ω."""
        self._require(B.base, ChartKind.SYMPLECTIC)
        images = [self.sharp_symplectic(B.base, a).components for a in self.annihilator(B)]
        return self.span(B.base, np.column_stack(images) if images else np.zeros((B.chart.dim, 0)))

    def complement_lambda(self, B: SubspaceBasis) -> SubspaceBasis:
        """Δ^{⊥_Λ} = ♯_Λ(Δ°); ♯_Λ has kernel ⟨η⟩ so the images are re-orthonormalized."""
        self._require(B.base, ChartKind.CONTACT)
        images = [self.sharp_lambda(B.base, a).components for a in self.annihilator(B)]
        return self.span(B.base, np.column_stack(images) if images else np.zeros((B.chart.dim, 0)))

    def complement_deta(self, B: SubspaceBasis) -> SubspaceBasis:
        """Δ^{⊥_dη} = {v | dη(v, Δ) = 0}."""
        self._require(B.base, ChartKind.CONTACT)
        M = B.matrix().T @ pairing_matrix(B.chart)
        return self.span(B.base, self._null_space(M, B.chart.dim))

    def complement_form(self, B: SubspaceBasis) -> SubspaceBasis:
        """Orthocomplement under the chart's own 2-form (ω, dη or Ω)."""
        M = B.matrix().T @ self.gram_matrix(B.base)
        return self.span(B.base, self._null_space(M, B.chart.dim))

    # ------------------------------------------------------------------
    # Subspace relations
    # ------------------------------------------------------------------

    def containment_residual(self, outer: SubspaceBasis, inner: SubspaceBasis) -> float:
        """Largest distance of a normalized vector of `inner` from span(`outer`)."""
        if inner.rank == 0:
            return 0.0
        V = inner.matrix()
        V = V / np.linalg.norm(V, axis=0)
        if outer.rank == 0:
            return float(np.max(np.linalg.norm(V, axis=0)))
        Q = self._column_space(outer.matrix())
        R = V - Q @ (Q.T @ V)
        return float(np.max(np.linalg.norm(R, axis=0)))

    def contains(self, outer: SubspaceBasis, inner: SubspaceBasis, tol: Optional[float] = None) -> bool:
        tol = self.settings.subspace_tol if tol is None else tol
        return self.containment_residual(outer, inner) < tol

    def span_residual(self, A: SubspaceBasis, B: SubspaceBasis) -> float:
        """Mutual projection residual; infinite when the dimensions differ."""
        if A.rank != B.rank:
            return float("inf")
        return max(self.containment_residual(A, B), self.containment_residual(B, A))

    def same_span(self, A: SubspaceBasis, B: SubspaceBasis, tol: Optional[float] = None) -> bool:
        tol = self.settings.subspace_tol if tol is None else tol
        return self.span_residual(A, B) < tol

    def intersection(self, A: SubspaceBasis, B: SubspaceBasis) -> SubspaceBasis:
        pt = A.base
        if A.rank == 0 or B.rank == 0:
            return self.span(pt, np.zeros((pt.chart.dim, 0)))
        QA = self._column_space(A.matrix())
        QB = self._column_space(B.matrix())
        C = self._null_space(np.hstack([QA, -QB]), QA.shape[1] + QB.shape[1])
        return self.span(pt, QA @ C[:QA.shape[1], :])

    def span_sum(self, A: SubspaceBasis, B: SubspaceBasis) -> SubspaceBasis:
        return self.span(A.base, np.hstack([A.matrix(), B.matrix()]))

    def intersect_kernel(self, B: SubspaceBasis, alpha: Covector) -> SubspaceBasis:
        """B ∩ ker α."""
        if B.rank == 0:
            return B
        M = B.matrix()
        C = self._null_space((alpha.components @ M).reshape(1, -1), B.rank)
        return self.span(B.base, M @ C)

    def horizontal_part(self, B: SubspaceBasis) -> SubspaceBasis:
        """B ∩ ℋ with ℋ = ker η."""
        return self.intersect_kernel(B, self.eta_covector(B.base))

    # ------------------------------------------------------------------
    # Classification
    # ------------------------------------------------------------------

    def classify_point(self, B: SubspaceBasis) -> PointPosition:
        self._require(B.base, ChartKind.CONTACT)
        if B.rank == 0:
            return PointPosition.HORIZONTAL
        V = B.matrix()
        V = V / np.linalg.norm(V, axis=0)
        eta = eta_array(B.chart, B.base.coords)
        if float(np.max(np.abs(eta @ V))) < self.settings.subspace_tol:
            return PointPosition.HORIZONTAL
        reeb_line = self.basis(B.base, [self.reeb(B.base)])
        if self.containment_residual(B, reeb_line) < self.settings.independence_tol:
            return PointPosition.VERTICAL
        return PointPosition.OBLIQUE

    def _classify_sample(self, B: SubspaceBasis) -> SubmanifoldType:
        chart = B.chart
        if chart.kind == ChartKind.CONTACT:
            C = self.complement_lambda(B)
            if self.contains(C, B):
                return SubmanifoldType.LEGENDRIAN if B.rank == chart.n else SubmanifoldType.ISOTROPIC
            if self.contains(B, C):
                return SubmanifoldType.COISOTROPIC
            return SubmanifoldType.NONE

        if chart.kind == ChartKind.SYMPLECTIC:
            C = self.complement_omega(B)
        else:
            C = self.complement_form(B)
        if self.contains(C, B):
            return SubmanifoldType.LAGRANGIAN if 2 * B.rank == chart.dim else SubmanifoldType.ISOTROPIC
        if self.contains(B, C):
            return SubmanifoldType.COISOTROPIC
        if self.intersection(B, C).rank == 0:
            return SubmanifoldType.SYMPLECTIC
        return SubmanifoldType.NONE

    def classify_submanifold(self, samples: Sequence[SubspaceBasis]) -> ClassificationResult:
        if not samples:
            raise GeometryError("No tangent samples to classify")
        kinds = {s.chart.kind for s in samples}
        if len(kinds) > 1:
            raise ChartMismatchError(
                "Samples live on different chart kinds",
                details={"kinds": sorted(k.value for k in kinds)}
            )
        per_sample = [self._classify_sample(B) for B in samples]
        verdicts = set(per_sample)
        verdict = per_sample[0] if len(verdicts) == 1 else SubmanifoldType.NONE
        self.logger.debug(f"Classified {len(samples)} samples on {samples[0].chart.label()}: {verdict}")
        return ClassificationResult(chart_kind=samples[0].chart.kind, per_sample=per_sample, verdict=verdict)
