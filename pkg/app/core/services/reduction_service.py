import logging
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation

from app.config import Settings
from app.core.models.dynamics import IntegratorConfig, Trajectory
from app.core.models.geometry import Chart, ChartKind, Point
from app.core.models.hamiltonian import CentralPotential, ScalarField
from app.core.models.reduction import (
    CommutationResult,
    LevelSetTangency,
    ReconstructionResult,
    ReducedSystem,
)
from app.core.models.symmetry import ActionFamily, GroupAction, MomentumValue
from app.core.services.dynamics_service import DynamicsService
from app.core.services.geometry_service import GeometryService
from app.core.services.hamiltonian_service import HamiltonianService
from app.core.services.symmetry_service import SymmetryService
from app.core.utils.exceptions import (
    ChartMismatchError,
    GeometryError,
    ReconstructionError,
    ReductionError,
)

logger = logging.getLogger(__name__)

MuLike = Union[MomentumValue, Sequence[float], np.ndarray, None]

CONTACT_MU_EXPLANATION = (
    "contact reduction is only available at mu = 0: the flow of an invariant H "
    "scales J by exp(-∫R(H)dt), so only the zero level set is preserved"
)


class ReductionService:
    """Momentum-level-set reduction, flow commutation and reconstruction."""

    def __init__(
        self,
        settings: Settings,
        geometry: GeometryService,
        hamiltonian: HamiltonianService,
        symmetry: SymmetryService,
        dynamics: DynamicsService
    ):
        self.settings = settings
        self.geometry = geometry
        self.hamiltonian = hamiltonian
        self.symmetry = symmetry
        self.dynamics = dynamics
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _mu(self, mu: MuLike, k: int) -> np.ndarray:
        if mu is None:
            return np.zeros(k)
        comps = mu.components if isinstance(mu, MomentumValue) else np.asarray(mu, dtype=np.float64).reshape(-1)
        if comps.shape[0] != k:
            raise ReductionError(
                f"mu must have length {k}, got {comps.shape[0]}",
                details={"expected": k, "found": int(comps.shape[0])}
            )
        return comps

    def _restricted_field(self, H: ScalarField, reduced_chart: Chart, section, kept: np.ndarray, name: str) -> ScalarField:
        """H ∘ section, with the gradient read off the kept slots of dH."""
        f = H.function
        gradient = None
        if H.gradient is not None:
            g = H.gradient
            gradient = lambda y: np.asarray(g(section(y)))[kept]
        return ScalarField(chart=reduced_chart, name=name, function=lambda y: f(section(y)), gradient=gradient)

    def _translation_slots(self, chart: Chart, k: int) -> np.ndarray:
        n = chart.n
        kept = list(range(k, n)) + list(range(n + k, 2 * n))
        if chart.kind == ChartKind.CONTACT:
            kept.append(chart.z_index)
        return np.asarray(kept, dtype=int)

    def _finish(self, **fields) -> ReducedSystem:
        reduced = ReducedSystem(**fields)
        reduced = reduced.model_copy(update={"vector_field": self.hamiltonian.vector_field(reduced.reduced_H)})
        self.logger.info(
            f"Reduced {reduced.full_chart.label()} by {reduced.action.label()} at mu={reduced.mu.components.tolist()} "
            f"→ {reduced.reduced_chart.label()}"
        )
        return reduced

    # ------------------------------------------------------------------
    # Reductions
    # ------------------------------------------------------------------

    def reduce_translation_symplectic(self, H: ScalarField, k: int, mu: MuLike = None) -> ReducedSystem:
        """Quotient of J⁻¹(μ) by translations of q¹..qᵏ: drop (qᵢ, pᵢ), i ≤ k."""
        chart = H.chart
        if chart.kind != ChartKind.SYMPLECTIC:
            raise ChartMismatchError("reduce_translation_symplectic needs a symplectic chart", details={"chart": chart.label()})
        if k >= chart.n:
            raise ReductionError(
                f"k={k} leaves a zero-dimensional quotient of {chart.label()}",
                details={"k": k, "n": chart.n}
            )
        action = self.symmetry.action(ActionFamily.LIFTED_TRANSLATION, chart, k)
        mu_arr = self._mu(mu, k)
        self.symmetry.require_invariant(action, H)

        n = chart.n
        reduced_chart = Chart(kind=ChartKind.SYMPLECTIC, n=n - k)
        kept = self._translation_slots(chart, k)

        def section(y: np.ndarray) -> np.ndarray:
            x = np.zeros(chart.dim)
            x[kept] = y
            x[n:n + k] = mu_arr
            return x

        def project(x: np.ndarray) -> np.ndarray:
            return np.array(x[kept])

        return self._finish(
            family=ActionFamily.LIFTED_TRANSLATION,
            action=action,
            k=k,
            full_chart=chart,
            reduced_chart=reduced_chart,
            reduced_H=self._restricted_field(H, reduced_chart, section, kept, f"{H.name}|mu"),
            mu=MomentumValue(components=mu_arr),
            project_fn=project,
            section_fn=section,
        )

    def reduce_contact_translation(self, H: ScalarField, k: int, mu: MuLike = None) -> ReducedSystem:
        """Quotient of J⁻¹(0) = {p₁..pₖ = 0} by contact translations; z is kept."""
        chart = H.chart
        if chart.kind != ChartKind.CONTACT:
            raise ChartMismatchError("reduce_contact_translation needs a contact chart", details={"chart": chart.label()})
        action = self.symmetry.action(ActionFamily.CONTACT_TRANSLATION, chart, k)
        mu_arr = self._mu(mu, k)
        if np.any(mu_arr != 0.0):
            raise ReductionError(CONTACT_MU_EXPLANATION, details={"mu": mu_arr.tolist()})
        self.symmetry.require_invariant(action, H)

        reduced_chart = Chart(kind=ChartKind.CONTACT, n=chart.n - k)
        kept = self._translation_slots(chart, k)

        def section(y: np.ndarray) -> np.ndarray:
            x = np.zeros(chart.dim)
            x[kept] = y
            return x

        def project(x: np.ndarray) -> np.ndarray:
            return np.array(x[kept])

        return self._finish(
            family=ActionFamily.CONTACT_TRANSLATION,
            action=action,
            k=k,
            full_chart=chart,
            reduced_chart=reduced_chart,
            reduced_H=self._restricted_field(H, reduced_chart, section, kept, f"{H.name}|0"),
            mu=MomentumValue(components=mu_arr),
            project_fn=project,
            section_fn=section,
        )

    def reduce_so3(self, H: ScalarField, mu0: float) -> ReducedSystem:
        """Planar reduction at μ = (0, 0, μ₀) onto (r, p_r) with the effective potential."""
        chart = H.chart
        if not isinstance(H.spec, CentralPotential):
            raise ReductionError("reduce_so3 needs a central_potential Hamiltonian", details={"hamiltonian": H.name})
        if chart.kind != ChartKind.SYMPLECTIC or chart.n != 3:
            raise ChartMismatchError("reduce_so3 needs a symplectic chart with n = 3", details={"chart": chart.label()})
        mu0 = float(mu0)
        if mu0 == 0.0:
            raise ReductionError("mu0 must be nonzero for a free action on the level set", details={"mu0": mu0})

        action = self.symmetry.action(ActionFamily.LIFTED_ROTATION_SO3, chart)
        self.symmetry.require_invariant(action, H)

        m = float(H.spec.mass)
        U, dU = self.hamiltonian.radial_profile(H.spec.radial)
        min_radius = self.settings.min_radius
        reduced_chart = Chart(kind=ChartKind.SYMPLECTIC, n=1)

        def check_radius(r: float) -> None:
            if not r > min_radius:
                raise ReductionError("Planar reduction is singular at r = 0", details={"r": float(r)})

        def section(y: np.ndarray) -> np.ndarray:
            r, pr = float(y[0]), float(y[1])
            check_radius(r)
            return np.array([r, 0.0, 0.0, pr, mu0 / r, 0.0])

        def project(x: np.ndarray) -> np.ndarray:
            q, p = x[0:3], x[3:6]
            r = float(np.linalg.norm(q))
            check_radius(r)
            return np.array([r, float(q @ p) / r])

        def value(y: np.ndarray) -> float:
            r, pr = float(y[0]), float(y[1])
            check_radius(r)
            return pr * pr / (2.0 * m) + mu0 * mu0 / (2.0 * m * r * r) + U(r)

        def gradient(y: np.ndarray) -> np.ndarray:
            r, pr = float(y[0]), float(y[1])
            check_radius(r)
            return np.array([-mu0 * mu0 / (m * r ** 3) + dU(r), pr / m])

        reduced_H = ScalarField(chart=reduced_chart, name="H_eff", function=value, gradient=gradient)
        return self._finish(
            family=ActionFamily.LIFTED_ROTATION_SO3,
            action=action,
            k=3,
            full_chart=chart,
            reduced_chart=reduced_chart,
            reduced_H=reduced_H,
            mu=MomentumValue(components=[0.0, 0.0, mu0]),
            project_fn=project,
            section_fn=section,
        )

    def reduce(self, action: GroupAction, H: ScalarField, mu: MuLike = None) -> ReducedSystem:
        family = ActionFamily(action.family)
        if family == ActionFamily.LIFTED_TRANSLATION:
            return self.reduce_translation_symplectic(H, action.k, mu)
        if family == ActionFamily.CONTACT_TRANSLATION:
            return self.reduce_contact_translation(H, action.k, mu)
        mu_arr = self._mu(mu, 3)
        if mu_arr[0] != 0.0 or mu_arr[1] != 0.0:
            raise ReductionError("SO(3) reduction is implemented for mu = (0, 0, mu0)", details={"mu": mu_arr.tolist()})
        return self.reduce_so3(H, mu_arr[2])

    # ------------------------------------------------------------------
    # Checks
    # ------------------------------------------------------------------

    def level_set_residual(self, reduced: ReducedSystem, x: np.ndarray) -> float:
        return float(np.max(np.abs(self.symmetry.momentum_array(reduced.action, x) - reduced.mu.components)))

    def require_on_level_set(self, reduced: ReducedSystem, pt: Point) -> None:
        residual = self.level_set_residual(reduced, pt.coords)
        if residual >= self.settings.level_set_tol:
            raise ReductionError(
                "Initial point is not on the momentum level set",
                details={"residual": residual, "mu": reduced.mu.components.tolist()}
            )

    def section_identity_residual(self, reduced: ReducedSystem, y: np.ndarray) -> float:
        return float(np.max(np.abs(reduced.project_array(reduced.section_array(y)) - y), initial=0.0))

    def random_level_point(self, reduced: ReducedSystem, rng: np.random.Generator) -> np.ndarray:
        """A random point of J⁻¹(μ): section of a random reduced point moved along its orbit."""
        y = rng.standard_normal(reduced.reduced_chart.dim)
        if reduced.family == ActionFamily.LIFTED_ROTATION_SO3:
            y[0] = 0.5 + abs(y[0])
            g = self.symmetry.element(reduced.action, Rotation.from_rotvec([0.0, 0.0, rng.uniform(-np.pi, np.pi)]).as_matrix())
        else:
            g = self.symmetry.random_element(reduced.action, rng)
        return self.symmetry.act_array(reduced.action, g, reduced.section_array(y))

    def check_reduced_hamiltonian(
        self,
        reduced: ReducedSystem,
        full_H: ScalarField,
        rng: Optional[np.random.Generator] = None,
        samples: int = 100
    ) -> float:
        """max |H_μ(π(x)) − H(x)| over sampled level-set points."""
        rng = rng or np.random.default_rng(self.settings.default_seed)
        residual = 0.0
        for _ in range(samples):
            x = self.random_level_point(reduced, rng)
            residual = max(residual, abs(reduced.reduced_H.value(reduced.project_array(x)) - full_H.value(x)))
        return residual

    def check_reeb_projection(self, reduced: ReducedSystem, pt: Point) -> float:
        """|Tπ(𝓡) − 𝓡_μ| at a level-set point of a contact reduction."""
        if reduced.full_chart.kind != ChartKind.CONTACT:
            raise ReductionError("Reeb projection applies to contact reductions")
        D = self.hamiltonian.jacobian_array(reduced.project_array, pt.coords)
        pushed = D[:, reduced.full_chart.z_index]
        reeb_mu = np.zeros(reduced.reduced_chart.dim)
        reeb_mu[reduced.reduced_chart.z_index] = 1.0
        return float(np.max(np.abs(pushed - reeb_mu)))

    def check_level_set_invariance(self, traj: Trajectory, action: GroupAction, mu: MuLike = None) -> float:
        """max |J(x(t)) − μ| along a trajectory."""
        mu_arr = self._mu(mu, action.algebra_dim)
        if len(traj) == 0:
            return 0.0
        J = np.array([self.symmetry.momentum_array(action, x) for x in traj.states])
        return float(np.max(np.abs(J - mu_arr)))

    def level_set_tangency_check(self, action: GroupAction, pt: Point, mu: MuLike) -> LevelSetTangency:
        """T_xJ⁻¹(μ)^⊥ = T_x(Gx) (ω on symplectic, Λ on contact charts), plus 𝓡 ∈ T_xJ⁻¹(μ) for contact."""
        if not action.is_abelian:
            raise ReductionError("Level-set tangency is checked for abelian families", details={"action": action.label()})
        mu_arr = self._mu(mu, action.algebra_dim)
        residual = float(np.max(np.abs(self.symmetry.momentum_array(action, pt.coords) - mu_arr)))
        if residual >= self.settings.level_set_tol:
            raise ReductionError(
                "Point is not on the momentum level set",
                details={"residual": residual, "mu": mu_arr.tolist()}
            )
        DJ = self.symmetry.momentum_jacobian(action, pt)
        sigma = np.linalg.svd(DJ, compute_uv=False)
        if sigma.shape[0] < action.algebra_dim or sigma[-1] <= self.settings.independence_tol:
            raise GeometryError(
                "Momentum value is not regular at this point",
                details={"singular_values": sigma.tolist()}
            )
        level = self.geometry.span(pt, self.geometry._null_space(DJ, pt.chart.dim))
        orbit = self.symmetry.orbit_tangent(action, pt)

        vertical = None
        if pt.chart.kind == ChartKind.CONTACT:
            complement = self.geometry.complement_lambda(level)
            reeb = self.geometry.basis(pt, [self.geometry.reeb(pt)])
            vertical = self.geometry.containment_residual(level, reeb)
        else:
            complement = self.geometry.complement_omega(level)

        return LevelSetTangency(
            level_rank=level.rank,
            orbit_rank=orbit.rank,
            complement_residual=self.geometry.span_residual(complement, orbit),
            orbit_containment_residual=self.geometry.containment_residual(level, orbit),
            vertical_residual=vertical,
        )

    # ------------------------------------------------------------------
    # Flows
    # ------------------------------------------------------------------

    def check_commutation(
        self,
        full_H: ScalarField,
        reduced: ReducedSystem,
        x0: Point,
        cfg: Optional[IntegratorConfig] = None
    ) -> CommutationResult:
        """max_t ‖π(Φ_t x0) − Φ_t^μ(π x0)‖ on a shared time grid."""
        self.require_on_level_set(reduced, x0)
        full = self.dynamics.flow(self.hamiltonian.vector_field(full_H), x0, cfg)
        small = self.dynamics.flow(reduced.vector_field, reduced.project(x0), cfg, t_eval=full.times)
        if small.times.shape != full.times.shape:
            raise ReductionError("Full and reduced runs produced different time grids")

        projected = np.array([reduced.project_array(x) for x in full.states])
        deviation = np.linalg.norm(projected - small.states, axis=1)
        result = CommutationResult(
            times=full.times,
            deviation=deviation,
            max_deviation=float(np.max(deviation)),
            full=full,
            reduced=small,
        )
        self.logger.info(f"Commutation deviation over {len(full)} states: {result.max_deviation:.3e}")
        return result

    def _section_velocity(self, reduced: ReducedSystem, y: np.ndarray, step: float = 1e-6) -> np.ndarray:
        """ḋ = D section(y)·Y_μ(y) by a central difference along the reduced velocity."""
        Y = reduced.vector_field.array(y)
        norm = float(np.linalg.norm(Y))
        if norm == 0.0:
            return np.zeros(reduced.full_chart.dim)
        h = step / norm
        return (reduced.section_array(y + h * Y) - reduced.section_array(y - h * Y)) / (2.0 * h)

    def reconstruct(
        self,
        reduced_traj: Trajectory,
        reduced: ReducedSystem,
        full_H: ScalarField,
        x0: Optional[Point] = None
    ) -> ReconstructionResult:
        """Rebuild c(t) = Φ_{g(t)} d(t) from d(t) = section(y(t)).

        ξ(t) solves ξ_M(d) = X_H(d) − ḋ by least squares; g(t) = g₀·exp(∫ξ dt)
        with g₀ chosen so that c(0) = x0.
        """
        if reduced_traj.chart != reduced.reduced_chart:
            raise ChartMismatchError("Reduced trajectory is not on the reduced chart")
        action = reduced.action
        X_H = self.hamiltonian.vector_field(full_H).array
        tol = self.settings.lsq_residual_tol

        d = np.array([reduced.section_array(y) for y in reduced_traj.states])
        xi = np.zeros((len(reduced_traj), action.algebra_dim))
        worst = 0.0
        for i, y in enumerate(reduced_traj.states):
            G = np.column_stack([self.symmetry.generator_array(action, e, d[i]) for e in np.eye(action.algebra_dim)])
            rhs = X_H(d[i]) - self._section_velocity(reduced, y)
            sol, *_ = np.linalg.lstsq(G, rhs, rcond=None)
            residual = float(np.linalg.norm(G @ sol - rhs))
            worst = max(worst, residual)
            if residual > tol:
                raise ReconstructionError(
                    f"Reconstruction least squares failed at t={reduced_traj.times[i]:.6g}",
                    details={"residual": residual, "tolerance": tol}
                )
            xi[i] = sol

        if len(reduced_traj) > 1:
            integral = CubicSpline(reduced_traj.times, xi, axis=0).antiderivative()(reduced_traj.times)
        else:
            integral = np.zeros_like(xi)
        g0 = self._initial_element(reduced, x0)
        states = np.empty_like(d)
        for i in range(len(reduced_traj)):
            g = self.symmetry.compose(action, g0, self.symmetry.exp(action, integral[i]))
            states[i] = self.symmetry.act_array(action, g, d[i])

        if x0 is not None:
            gap = float(np.max(np.abs(states[0] - x0.coords)))
            if gap >= 1e-8 * max(1.0, float(np.max(np.abs(x0.coords)))):
                raise ReconstructionError("x0 is not on the orbit of the section", details={"gap": gap})

        self.logger.info(f"Reconstructed {len(reduced_traj)} states, max least-squares residual {worst:.3e}")
        return ReconstructionResult(
            trajectory=Trajectory(chart=reduced.full_chart, times=reduced_traj.times, states=states),
            xi=xi,
            max_lsq_residual=worst,
        )

    def _initial_element(self, reduced: ReducedSystem, x0: Optional[Point]):
        action = reduced.action
        if x0 is None:
            return self.symmetry.identity(action)
        if reduced.family == ActionFamily.LIFTED_ROTATION_SO3:
            angle = float(np.arctan2(x0.coords[1], x0.coords[0]))
            return self.symmetry.element(action, Rotation.from_rotvec([0.0, 0.0, angle]).as_matrix())
        return self.symmetry.element(action, x0.coords[:action.k])
