import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.config import Settings
from app.core.models.geometry import (
    Chart,
    ChartKind,
    Covector,
    Point,
    PointPosition,
    SubmanifoldType,
    SubspaceBasis,
    TangentVector,
)
from app.core.models.hamiltonian import TranslationInvariant
from app.core.models.reduction import ArrayMap, ReducedSystem
from app.core.models.symmetry import ActionFamily, GroupAction, GroupElement, MomentumValue
from app.core.models.symplectification import (
    CommutativityReport,
    LiftAgreement,
    LiftedComplementResult,
    MuProbe,
    NondegeneracyResult,
)
from app.core.services.corpus_service import CorpusService
from app.core.services.geometry_service import GeometryService, eta_array
from app.core.services.hamiltonian_service import HamiltonianService
from app.core.services.reduction_service import ReductionService
from app.core.services.symmetry_service import SymmetryService
from app.core.utils.exceptions import ChartMismatchError, GeometryError, ReductionError, SymmetryError
from app.core.utils.sampling import run_batched

logger = logging.getLogger(__name__)

MU_NONZERO_EXPLANATION = (
    "the symplectified momentum is e^t J, so its level set at mu != 0 is not J^-1(mu) x R; "
    "commutativity is only available at mu = 0"
)


class SymplectificationService:
    """The symplectification (M×ℝ, Ω = e^t(dη + dt∧η)) and the commutativity check at μ = 0."""

    def __init__(
        self,
        settings: Settings,
        geometry: GeometryService,
        hamiltonian: HamiltonianService,
        symmetry: SymmetryService,
        reduction: ReductionService,
        corpus: CorpusService
    ):
        self.settings = settings
        self.geometry = geometry
        self.hamiltonian = hamiltonian
        self.symmetry = symmetry
        self.reduction = reduction
        self.corpus = corpus
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------
    # Charts and points
    # ------------------------------------------------------------------

    def symplectified_chart(self, base: Chart) -> Chart:
        if base.kind != ChartKind.CONTACT:
            raise ChartMismatchError("Only contact charts are symplectified", details={"chart": base.label()})
        return Chart(kind=ChartKind.SYMPLECTIFIED, n=base.n)

    def lift_point(self, base_pt: Point, t: float = 0.0) -> Point:
        chart = self.symplectified_chart(base_pt.chart)
        return Point(chart=chart, coords=np.append(base_pt.coords, t))

    def split(self, pt: Point) -> Tuple[Point, float]:
        """(x, t) ↦ x, t."""
        self.geometry._require(pt, ChartKind.SYMPLECTIFIED)
        return Point(chart=pt.chart.base, coords=pt.coords[:-1]), pt.t

    def lift_vector(self, pt: Point, v: Union[TangentVector, np.ndarray], v_t: float = 0.0) -> TangentVector:
        comps = v.components if isinstance(v, TangentVector) else np.asarray(v, dtype=np.float64)
        return TangentVector(base=pt, components=np.append(comps, v_t))

    # ------------------------------------------------------------------
    # Forms
    # ------------------------------------------------------------------

    def alpha_covector(self, pt: Point) -> Covector:
        """α = −e^t η (no dt component)."""
        self.geometry._require(pt, ChartKind.SYMPLECTIFIED)
        return Covector(base=pt, components=-np.exp(pt.t) * eta_array(pt.chart, pt.coords))

    def alpha(self, pt: Point, v: TangentVector) -> float:
        self.geometry._require_based_at(pt, v)
        return self.alpha_covector(pt)(v)

    def omega_lifted(self, pt: Point, u: TangentVector, v: TangentVector) -> float:
        """Ω(u, v) = e^t[dη(u_b, v_b) + u_t η(v_b) − v_t η(u_b)]."""
        self.geometry._require(pt, ChartKind.SYMPLECTIFIED)
        self.geometry._require_based_at(pt, u, v)
        return float(u.components @ self.geometry.gram_matrix(pt) @ v.components)

    def omega_matrix(self, pt: Point) -> np.ndarray:
        self.geometry._require(pt, ChartKind.SYMPLECTIFIED)
        return self.geometry.gram_matrix(pt)

    def closedness_residual(self, pt: Point, step: Optional[float] = None) -> float:
        """max |dΩ| with dΩ_{ijk} = ∂ᵢΩⱼₖ + ∂ⱼΩₖᵢ + ∂ₖΩᵢⱼ by central differences."""
        self.geometry._require(pt, ChartKind.SYMPLECTIFIED)
        h = self.settings.jacobian_step if step is None else step
        dim = pt.chart.dim
        dG = np.empty((dim, dim, dim))
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h
            plus = self.geometry.gram_matrix(Point(chart=pt.chart, coords=pt.coords + e))
            minus = self.geometry.gram_matrix(Point(chart=pt.chart, coords=pt.coords - e))
            dG[i] = (plus - minus) / (2.0 * h)
        cyclic = dG + np.transpose(dG, (1, 2, 0)) + np.transpose(dG, (2, 0, 1))
        return float(np.max(np.abs(cyclic)))

    def exactness_residual(self, pt: Point) -> float:
        """max |Ω + dα| by central differences."""
        d_alpha = self.geometry.exterior_derivative(self.alpha_covector, pt)
        return float(np.max(np.abs(self.omega_matrix(pt) + d_alpha)))

    def nondegeneracy(self, pt: Point) -> NondegeneracyResult:
        """det Ω = e^{2(n+1)t} in Darboux coordinates."""
        det = float(np.linalg.det(self.omega_matrix(pt)))
        expected = float(np.exp(2 * (pt.chart.n + 1) * pt.t))
        return NondegeneracyResult(
            t=pt.t,
            determinant=det,
            expected=expected,
            relative_error=abs(det - expected) / expected,
        )

    # ------------------------------------------------------------------
    # Submanifolds
    # ------------------------------------------------------------------

    def lift_basis(self, B: SubspaceBasis, t: float = 0.0) -> SubspaceBasis:
        """T_{(x,t)}(N×ℝ): base vectors padded with v_t = 0, plus ∂t."""
        pt = self.lift_point(B.base, t)
        vectors = [self.lift_vector(pt, v) for v in B.vectors]
        vectors.append(self.geometry.coordinate_vector(pt, pt.chart.t_index))
        return self.geometry.basis(pt, vectors)

    def lift_submanifold(self, samples: Sequence[SubspaceBasis], ts: Optional[Sequence[float]] = None) -> List[SubspaceBasis]:
        ts = [0.0] * len(samples) if ts is None else list(ts)
        return [self.lift_basis(B, t) for B, t in zip(samples, ts)]

    def lifted_complement_check(self, samples: Sequence[SubspaceBasis], ts: Optional[Sequence[float]] = None) -> LiftedComplementResult:
        """(T(N×ℝ))^⊥ = (TN)^{⊥_Λ} × {0} for vertical coisotropic N without horizontal points."""
        residual, t_comp, eta_res = 0.0, 0.0, 0.0
        lifted = self.lift_submanifold(samples, ts)
        for B, L in zip(samples, lifted):
            if self.geometry.classify_point(B) == PointPosition.HORIZONTAL:
                raise GeometryError(
                    "Lifted complement check needs a submanifold without horizontal points",
                    details={"point": B.base.coords.tolist()}
                )
            omega_c = self.geometry.complement_form(L)
            lambda_c = self.geometry.complement_lambda(B)
            padded = self.geometry.span(L.base, np.vstack([lambda_c.matrix(), np.zeros((1, lambda_c.rank))]))
            residual = max(residual, self.geometry.span_residual(omega_c, padded))

            M = omega_c.matrix()
            if M.shape[1]:
                t_comp = max(t_comp, float(np.max(np.abs(M[-1]))))
                eta = eta_array(B.chart, B.base.coords)
                eta_res = max(eta_res, float(np.max(np.abs(eta @ M[:-1]))))
        return LiftedComplementResult(samples=len(samples), residual=residual, t_component=t_comp, eta_residual=eta_res)

    def legendrian_lagrangian_agreement(
        self,
        rng: np.random.Generator,
        points: int = 100,
        names: Optional[Sequence[str]] = None
    ) -> List[LiftAgreement]:
        """Classifier on N against classifier on N×ℝ over the built-in corpus."""
        out = []
        for name in names or self.corpus.names():
            samples = self.corpus.samples(name, rng, points)
            ts = rng.standard_normal(len(samples))
            base = self.geometry.classify_submanifold(samples)
            lifted = self.geometry.classify_submanifold(self.lift_submanifold(samples, ts))
            agrees = (base.verdict == SubmanifoldType.LEGENDRIAN) == (lifted.verdict == SubmanifoldType.LAGRANGIAN)
            if not agrees:
                self.logger.warning(f"⚠️ {name}: base {base.verdict}, lifted {lifted.verdict}")
            out.append(LiftAgreement(
                name=name,
                samples=len(samples),
                base_verdict=base.verdict,
                lifted_verdict=lifted.verdict,
                agrees=agrees,
            ))
        return out

    # ------------------------------------------------------------------
    # Lifted actions
    # ------------------------------------------------------------------

    def _base_action(self, action: GroupAction) -> None:
        if ActionFamily(action.family) != ActionFamily.CONTACT_TRANSLATION:
            raise SymmetryError("Symplectified actions are built from contact actions", details={"action": action.label()})

    def act_lifted(self, action: GroupAction, g: GroupElement, pt: Point) -> Point:
        """Φ̃_g(x, t) = (Φ_g x, t)."""
        self._base_action(action)
        base, t = self.split(pt)
        return self.lift_point(self.symmetry.act(action, g, base), t)

    def pushforward_lifted(self, action: GroupAction, g: GroupElement, v: TangentVector) -> TangentVector:
        base, _ = self.split(v.base)
        pushed = self.symmetry.pushforward(action, g, TangentVector(base=base, components=v.components[:-1]))
        image = self.act_lifted(action, g, v.base)
        return self.lift_vector(image, pushed, float(v.components[-1]))

    def lifted_momentum(self, action: GroupAction, pt: Point) -> MomentumValue:
        """J̃(x, t) = e^t J(x)."""
        self._base_action(action)
        base, t = self.split(pt)
        return MomentumValue(components=np.exp(t) * self.symmetry.momentum(action, base).components)

    def lifted_momentum_direct(self, action: GroupAction, pt: Point) -> MomentumValue:
        """J̃(x, t)ξ = α(ξ_{M×ℝ}) with ξ_{M×ℝ} = (ξ_M, 0)."""
        self._base_action(action)
        base, _ = self.split(pt)
        comps = []
        for e in np.eye(action.algebra_dim):
            xi_M = self.symmetry.generator_array(action, e, base.coords)
            comps.append(self.alpha(pt, self.lift_vector(pt, xi_M)))
        return MomentumValue(components=comps)

    def lifted_action_invariance_check(
        self,
        action: GroupAction,
        g: GroupElement,
        pt: Point,
        rng: np.random.Generator,
        pairs: int = 8
    ) -> float:
        """max |Φ̃*α − α| and |Φ̃*Ω − Ω| over random tangent vectors."""
        image = self.act_lifted(action, g, pt)
        residual = 0.0
        for _ in range(pairs):
            u = self.geometry.random_vector(pt, rng)
            v = self.geometry.random_vector(pt, rng)
            gu = self.pushforward_lifted(action, g, u)
            gv = self.pushforward_lifted(action, g, v)
            residual = max(
                residual,
                abs(self.alpha(image, gu) - self.alpha(pt, u)),
                abs(self.omega_lifted(image, gu, gv) - self.omega_lifted(pt, u, v)),
            )
        return residual

    # ------------------------------------------------------------------
    # Commutativity at μ = 0
    # ------------------------------------------------------------------

    def reference_reduction(self, n: int, k: int) -> ReducedSystem:
        """Contact-translation reduction of Contact(n) at μ = 0 with a translation-invariant H."""
        chart = Chart(kind=ChartKind.CONTACT, n=n)
        H = self.hamiltonian.build(TranslationInvariant(), chart)
        return self.reduction.reduce_contact_translation(H, k)

    @staticmethod
    def _secant(f: ArrayMap, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """(f(x+v) − f(x−v))/2, the exact differential of an affine map."""
        return (f(x + v) - f(x - v)) / 2.0

    def _lifted_representative(
        self,
        reduced: ReducedSystem,
        g: GroupElement,
        y: np.ndarray,
        u: np.ndarray,
        shift: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Lift (y, u) of the symplectified quotient to a point and vector of J̃⁻¹(0).

        The base part is Φ_g ∘ section pushed forward, plus the orbit direction ξ_M(shift).
        """
        action = reduced.action
        x0 = reduced.section_array(y)
        w0 = self._secant(reduced.section_array, y, u[:-1])
        moved = self.symmetry.pushforward(
            action, g, TangentVector(base=Point(chart=reduced.full_chart, coords=x0), components=w0)
        )
        x = moved.base.coords
        w = moved.components + self.symmetry.generator_array(action, shift, x)
        return x, np.append(w, u[-1])

    def _level_residual(self, action: GroupAction, x: np.ndarray, t: float, lifted: np.ndarray) -> float:
        """|J̃(x, t)| and |dJ̃ · ũ|, i.e. the lifted point lies on J̃⁻¹(0) and ũ is tangent to it."""
        J = lambda y: self.symmetry.momentum_array(action, y)
        value = np.exp(t) * J(x)
        tangency = np.exp(t) * (self._secant(J, x, lifted[:-1]) + J(x) * lifted[-1])
        return float(max(np.max(np.abs(value)), np.max(np.abs(tangency))))

    def _pair_residuals(
        self,
        reduced: ReducedSystem,
        rng: np.random.Generator,
        size: int
    ) -> Tuple[float, float, float]:
        action = reduced.action
        full_chart = self.symplectified_chart(reduced.full_chart)
        small_chart = self.symplectified_chart(reduced.reduced_chart)
        residual, representative, level = 0.0, 0.0, 0.0
        for _ in range(size):
            y = rng.standard_normal(reduced.reduced_chart.dim)
            t = float(rng.standard_normal())
            u = rng.standard_normal(small_chart.dim)
            v = rng.standard_normal(small_chart.dim)

            # Path B: Ω̃ on tangent vectors of J̃⁻¹(0) ⊂ M×ℝ
            g = self.symmetry.random_element(action, rng)
            x, lu = self._lifted_representative(reduced, g, y, u, rng.standard_normal(action.algebra_dim))
            _, lv = self._lifted_representative(reduced, g, y, v, rng.standard_normal(action.algebra_dim))
            level = max(
                level,
                self._level_residual(action, x, t, lu),
                self._level_residual(action, x, t, lv),
            )
            full_pt = Point(chart=full_chart, coords=np.append(x, t))
            path_b = float(lu @ self.geometry.gram_matrix(full_pt) @ lv)

            # Path A: Ω̄ on the symplectified reduced chart, at H(x, t) on H_*ũ, H_*ṽ
            projected = reduced.project_array(x)
            pu = np.append(self._secant(reduced.project_array, x, lu[:-1]), lu[-1])
            pv = np.append(self._secant(reduced.project_array, x, lv[:-1]), lv[-1])
            small_pt = Point(chart=small_chart, coords=np.append(projected, t))
            path_a = float(pu @ self.geometry.gram_matrix(small_pt) @ pv)
            residual = max(residual, abs(path_a - path_b))

            # another group element and other orbit shifts over the same quotient data
            g2 = self.symmetry.random_element(action, rng)
            x2, su = self._lifted_representative(reduced, g2, y, u, rng.standard_normal(action.algebra_dim))
            _, sv = self._lifted_representative(reduced, g2, y, v, rng.standard_normal(action.algebra_dim))
            shifted_pt = Point(chart=full_chart, coords=np.append(x2, t))
            path_b2 = float(su @ self.geometry.gram_matrix(shifted_pt) @ sv)
            pu2 = self._secant(reduced.project_array, x2, su[:-1])
            representative = max(
                representative,
                abs(path_b2 - path_b),
                float(np.max(np.abs(reduced.project_array(x2) - y))),
                float(np.max(np.abs(pu2 - u[:-1]))),
            )
        return residual, representative, level

    def mu_nonzero_probe(self, n: int, k: int, mu: Sequence[float], t: float = 1.0, seed: Optional[int] = None) -> MuProbe:
        """At a base point with J = μ ≠ 0 and t ≠ 0, the lifted momentum is e^t μ."""
        mu = np.asarray(mu, dtype=np.float64).reshape(-1)
        chart = Chart(kind=ChartKind.CONTACT, n=n)
        action = self.symmetry.action(ActionFamily.CONTACT_TRANSLATION, chart, k)
        rng = np.random.default_rng(self.settings.default_seed if seed is None else seed)
        x = rng.standard_normal(chart.dim)
        x[n:n + k] = mu
        lifted = self.lifted_momentum(action, self.lift_point(Point(chart=chart, coords=x), t)).components
        gap = float(np.max(np.abs(lifted - mu)))
        return MuProbe(
            t=t,
            mu=mu.tolist(),
            lifted_momentum=lifted.tolist(),
            gap=gap,
            product_structure_holds=gap < self.settings.level_set_tol,
        )

    def commutativity_check(
        self,
        n: int,
        k: int,
        mu: Optional[Sequence[float]] = None,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
        probe_mu: Optional[Sequence[float]] = None
    ) -> CommutativityReport:
        """Compare Ω̄ (symplectify M₀) with Ω̃ (reduce the symplectification) on random tangent pairs.

        M₀ comes from the contact-translation reduction; Path B samples J̃⁻¹(0) through its
        section and projects with its own project map.
        """
        if not 1 <= k <= n:
            raise ReductionError(f"Need 1 <= k <= n, got n={n}, k={k}", details={"n": n, "k": k})
        if mu is not None and np.any(np.asarray(mu, dtype=np.float64) != 0.0):
            raise ReductionError(MU_NONZERO_EXPLANATION, details={"mu": list(map(float, mu))})

        samples = self.settings.default_samples if samples is None else samples
        seed = self.settings.default_seed if seed is None else seed
        reduced = self.reference_reduction(n, k)
        if samples > 0:
            residual, representative, level = run_batched(
                self.settings, lambda rng, size: self._pair_residuals(reduced, rng, size), seed, samples
            )
        else:
            residual, representative, level = 0.0, 0.0, 0.0

        probe = None
        if probe_mu is not None:
            probe = self.mu_nonzero_probe(n, k, probe_mu, seed=seed)

        report = CommutativityReport(
            n=n,
            k=k,
            samples=samples,
            max_residual=residual,
            representative_residual=representative,
            level_residual=level,
            mu_probe=probe,
        )
        self.logger.info(
            f"Commutativity n={n}, k={k}: residual {residual:.3e}, level {level:.3e} over {samples} pairs"
        )
        return report
