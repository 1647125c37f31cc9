import logging
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.spatial.transform import Rotation

from app.config import Settings
from app.core.models.dynamics import Trajectory
from app.core.models.geometry import ChartKind, Point, TangentVector
from app.core.models.hamiltonian import ScalarField
from app.core.models.symmetry import (
    ActionFamily,
    AlgebraElement,
    GroupAction,
    GroupElement,
    MomentumDissipation,
    MomentumValue,
)
from app.core.services.geometry_service import GeometryService, eta_array, pairing_matrix
from app.core.services.hamiltonian_service import HamiltonianService
from app.core.utils.exceptions import ChartMismatchError, InvarianceError, SymmetryError

logger = logging.getLogger(__name__)

AlgebraLike = Union[AlgebraElement, Sequence[float], np.ndarray]


class SymmetryService:
    """Group actions, infinitesimal generators and momentum maps."""

    def __init__(self, settings: Settings, geometry: GeometryService, hamiltonian: HamiltonianService):
        self.settings = settings
        self.geometry = geometry
        self.hamiltonian = hamiltonian
        self.logger = logging.getLogger(__name__)

    def action(self, family: Union[ActionFamily, str], chart, k: int = 1) -> GroupAction:
        try:
            return GroupAction(family=ActionFamily(family), chart=chart, k=k)
        except ValueError as e:
            raise SymmetryError(f"Invalid action {family} on {chart.label()}: {e}", details={"family": str(family)})

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def _family(self, action: GroupAction) -> ActionFamily:
        return ActionFamily(action.family)

    def _require_point(self, action: GroupAction, pt: Point) -> None:
        if pt.chart != action.chart:
            raise ChartMismatchError(
                f"{action.label()} does not act on {pt.chart.label()}",
                details={"action": action.label(), "chart": pt.chart.label()}
            )

    def validate_element(self, action: GroupAction, g: GroupElement) -> None:
        if ActionFamily(g.family) != self._family(action):
            raise SymmetryError(
                f"Group element of {ActionFamily(g.family).value} used with {action.label()}",
                details={"element_family": ActionFamily(g.family).value}
            )
        if g.is_rotation:
            O = g.data
            if O.shape != (3, 3):
                raise SymmetryError(f"Rotation must be 3x3, got {O.shape}")
            orth = float(np.linalg.norm(O.T @ O - np.eye(3)))
            if orth >= 1e-10 or np.linalg.det(O) <= 0:
                raise SymmetryError("Matrix is not a rotation", details={"orthogonality_residual": orth})
        elif g.data.shape != (action.k,):
            raise SymmetryError(
                f"Translation must have length {action.k}, got {g.data.shape}",
                details={"expected": action.k, "found": list(g.data.shape)}
            )

    def _xi(self, action: GroupAction, xi: AlgebraLike) -> np.ndarray:
        comps = xi.components if isinstance(xi, AlgebraElement) else np.asarray(xi, dtype=np.float64).reshape(-1)
        if comps.shape[0] != action.algebra_dim:
            raise SymmetryError(
                f"Algebra element must have length {action.algebra_dim}, got {comps.shape[0]}",
                details={"expected": action.algebra_dim, "found": int(comps.shape[0])}
            )
        return comps

    def algebra_basis(self, action: GroupAction) -> List[AlgebraElement]:
        return [AlgebraElement(components=e) for e in np.eye(action.algebra_dim)]

    # ------------------------------------------------------------------
    # Group structure
    # ------------------------------------------------------------------

    def element(self, action: GroupAction, data) -> GroupElement:
        g = GroupElement(family=self._family(action), data=data)
        self.validate_element(action, g)
        return g

    def identity(self, action: GroupAction) -> GroupElement:
        if self._family(action) == ActionFamily.LIFTED_ROTATION_SO3:
            return self.element(action, np.eye(3))
        return self.element(action, np.zeros(action.k))

    def compose(self, action: GroupAction, g: GroupElement, h: GroupElement) -> GroupElement:
        """g·h."""
        if g.is_rotation:
            return self.element(action, g.data @ h.data)
        return self.element(action, g.data + h.data)

    def inverse(self, action: GroupAction, g: GroupElement) -> GroupElement:
        if g.is_rotation:
            return self.element(action, g.data.T)
        return self.element(action, -g.data)

    def exp(self, action: GroupAction, xi: AlgebraLike, t: float = 1.0) -> GroupElement:
        """exp(tξ): tξ for translations, Rodrigues for so(3)."""
        v = self._xi(action, xi)
        if self._family(action) == ActionFamily.LIFTED_ROTATION_SO3:
            return self.element(action, Rotation.from_rotvec(t * v).as_matrix())
        return self.element(action, t * v)

    def random_element(self, action: GroupAction, rng: np.random.Generator, scale: float = 1.0) -> GroupElement:
        if self._family(action) == ActionFamily.LIFTED_ROTATION_SO3:
            # normalized Gaussian quaternions are uniform on SO(3)
            return self.element(action, Rotation.from_quat(rng.standard_normal(4)).as_matrix())
        return self.element(action, scale * rng.standard_normal(action.k))

    def coadjoint(self, action: GroupAction, g: GroupElement, mu: MomentumValue) -> MomentumValue:
        """Ad*_{g⁻¹}μ: identity for abelian families, Oμ for SO(3)."""
        self.validate_element(action, g)
        if g.is_rotation:
            return MomentumValue(components=g.data @ mu.components)
        return mu

    # ------------------------------------------------------------------
    # Action and generators
    # ------------------------------------------------------------------

    def act_array(self, action: GroupAction, g: GroupElement, x: np.ndarray) -> np.ndarray:
        y = np.array(x, dtype=np.float64)
        if g.is_rotation:
            y[0:3] = g.data @ x[0:3]
            y[3:6] = g.data @ x[3:6]
        else:
            y[:action.k] += g.data
        return y

    def act(self, action: GroupAction, g: GroupElement, pt: Point) -> Point:
        self._require_point(action, pt)
        self.validate_element(action, g)
        return Point(chart=pt.chart, coords=self.act_array(action, g, pt.coords))

    def pushforward(self, action: GroupAction, g: GroupElement, v: TangentVector) -> TangentVector:
        """Tangent map of Φ_g; the families are affine so this is exact."""
        image = self.act(action, g, v.base)
        w = np.array(v.components)
        if g.is_rotation:
            w[0:3] = g.data @ v.components[0:3]
            w[3:6] = g.data @ v.components[3:6]
        return TangentVector(base=image, components=w)

    def generator_array(self, action: GroupAction, xi: np.ndarray, x: np.ndarray) -> np.ndarray:
        v = np.zeros(action.chart.dim)
        if self._family(action) == ActionFamily.LIFTED_ROTATION_SO3:
            v[0:3] = np.cross(xi, x[0:3])
            v[3:6] = np.cross(xi, x[3:6])
        else:
            v[:action.k] = xi
        return v

    def generator(self, action: GroupAction, xi: AlgebraLike, pt: Point) -> TangentVector:
        """ξ_M(x) = d/dt|₀ Φ(exp(tξ), x)."""
        self._require_point(action, pt)
        return TangentVector(base=pt, components=self.generator_array(action, self._xi(action, xi), pt.coords))

    def generator_fd(self, action: GroupAction, xi: AlgebraLike, pt: Point, step: float = 1e-6) -> TangentVector:
        """Central difference of t ↦ Φ(exp(tξ), x) at t = 0."""
        forward = self.act(action, self.exp(action, xi, step), pt).coords
        backward = self.act(action, self.exp(action, xi, -step), pt).coords
        return TangentVector(base=pt, components=(forward - backward) / (2.0 * step))

    def orbit_tangent(self, action: GroupAction, pt: Point):
        """T_x(Gx) spanned by the generators of an algebra basis."""
        M = np.column_stack([self.generator_array(action, e, pt.coords) for e in np.eye(action.algebra_dim)])
        return self.geometry.span(pt, M)

    # ------------------------------------------------------------------
    # Momentum maps
    # ------------------------------------------------------------------

    def momentum_array(self, action: GroupAction, x: np.ndarray) -> np.ndarray:
        family = self._family(action)
        n = action.chart.n
        if family == ActionFamily.LIFTED_ROTATION_SO3:
            return np.cross(x[0:3], x[3:6])
        if family == ActionFamily.LIFTED_TRANSLATION:
            return np.array(x[n:n + action.k])
        # J(x)ξ = −η(ξ_M(x))
        eta = eta_array(action.chart, x)
        return np.array([-float(eta @ self.generator_array(action, e, x)) for e in np.eye(action.k)])

    def momentum(self, action: GroupAction, pt: Point) -> MomentumValue:
        self._require_point(action, pt)
        return MomentumValue(components=self.momentum_array(action, pt.coords))

    def exact_momentum(self, action: GroupAction, pt: Point) -> MomentumValue:
        """J(x)ξ = λ_M(ξ_M(x)) for cotangent-lifted actions."""
        self._require_point(action, pt)
        if action.chart.kind != ChartKind.SYMPLECTIC:
            raise SymmetryError("exact_momentum applies to cotangent-lifted actions", details={"action": action.label()})
        comps = [
            self.geometry.liouville(pt, TangentVector(base=pt, components=self.generator_array(action, e, pt.coords)))
            for e in np.eye(action.algebra_dim)
        ]
        return MomentumValue(components=comps)

    def momentum_jacobian(self, action: GroupAction, pt: Point) -> np.ndarray:
        """DJ(x), shape (dim 𝔤, dim M). J is at most quadratic, so central differences are exact up to rounding."""
        self._require_point(action, pt)
        f = lambda x: self.momentum_array(action, x)
        return self.hamiltonian.jacobian_array(f, pt.coords)

    def momentum_component(self, action: GroupAction, xi: np.ndarray) -> ScalarField:
        """Ĵ(ξ)(x) = J(x)·ξ as a scalar field (no analytic gradient)."""
        return self.hamiltonian.scalar(
            action.chart,
            lambda x: float(self.momentum_array(action, x) @ xi),
            name="J(xi)",
        )

    # ------------------------------------------------------------------
    # Checks
    # ------------------------------------------------------------------

    def check_momentum_condition(self, action: GroupAction, pt: Point, xi: Optional[AlgebraLike] = None) -> float:
        """dĴ(ξ) = i_{ξ_M}ω, or on contact charts dĴ(ξ) − 𝓡(Ĵ(ξ))η = i_{ξ_M}dη together with X_{Ĵ(ξ)} = ξ_M."""
        self._require_point(action, pt)
        x = pt.coords
        chart = action.chart
        W = pairing_matrix(chart)
        directions = np.eye(action.algebra_dim) if xi is None else [self._xi(action, xi)]

        residual = 0.0
        for e in directions:
            norm = float(np.linalg.norm(e))
            if norm == 0.0:
                continue
            e = e / norm
            J = self.momentum_component(action, e)
            dJ = self.hamiltonian.grad_array(J, x)
            xi_M = self.generator_array(action, e, x)
            if chart.kind == ChartKind.SYMPLECTIC:
                residual = max(residual, float(np.max(np.abs(dJ - W.T @ xi_M))))
                continue
            eta = eta_array(chart, x)
            lhs = dJ - dJ[chart.z_index] * eta
            residual = max(residual, float(np.max(np.abs(lhs - W.T @ xi_M))))
            residual = max(residual, float(np.max(np.abs(self.hamiltonian.xh_array(J, x) - xi_M))))
        return residual

    def check_equivariance(self, action: GroupAction, g: GroupElement, pt: Point) -> float:
        """|J(Φ_g x) − Ad*_{g⁻¹}J(x)|."""
        lhs = self.momentum(action, self.act(action, g, pt))
        rhs = self.coadjoint(action, g, self.momentum(action, pt))
        return float(np.max(np.abs(lhs.components - rhs.components)))

    def check_liouville_invariance(self, action: GroupAction, g: GroupElement, pt: Point, rng: np.random.Generator, pairs: int = 8) -> float:
        """Φ_g preserves λ_M and ω (lifted families) or η and dη (contact translations)."""
        self._require_point(action, pt)
        image = self.act(action, g, pt)
        W = pairing_matrix(action.chart)
        residual = 0.0
        for _ in range(pairs):
            u = self.geometry.random_vector(pt, rng)
            v = self.geometry.random_vector(pt, rng)
            gu = self.pushforward(action, g, u)
            gv = self.pushforward(action, g, v)
            if action.chart.kind == ChartKind.SYMPLECTIC:
                one_form = abs(self.geometry.liouville(image, gu) - self.geometry.liouville(pt, u))
            else:
                one_form = abs(self.geometry.eta(image, gu) - self.geometry.eta(pt, u))
            two_form = abs(float(gu.components @ W @ gv.components) - float(u.components @ W @ v.components))
            residual = max(residual, one_form, two_form)
        return residual

    def invariance_residual(
        self,
        action: GroupAction,
        H: ScalarField,
        rng: Optional[np.random.Generator] = None,
        samples: Optional[int] = None
    ) -> float:
        """max |H(Φ_g x) − H(x)| / max(1, |H(x)|) over random g and x."""
        if H.chart != action.chart:
            raise ChartMismatchError(
                f"{H.name} lives on {H.chart.label()}, action on {action.chart.label()}",
                details={"field_chart": H.chart.label(), "action_chart": action.chart.label()}
            )
        rng = rng or np.random.default_rng(self.settings.default_seed)
        samples = samples or self.settings.invariance_samples
        residual = 0.0
        for _ in range(samples):
            x = rng.standard_normal(action.chart.dim)
            g = self.random_element(action, rng)
            h = H.value(x)
            residual = max(residual, abs(H.value(self.act_array(action, g, x)) - h) / max(1.0, abs(h)))
        return residual

    def require_invariant(self, action: GroupAction, H: ScalarField, rng: Optional[np.random.Generator] = None) -> float:
        residual = self.invariance_residual(action, H, rng)
        if residual >= self.settings.invariance_tol:
            raise InvarianceError(
                f"{H.name} is not invariant under {action.label()}",
                details={"residual": residual, "tolerance": self.settings.invariance_tol}
            )
        return residual

    def momentum_dissipation_check(self, action: GroupAction, H: ScalarField, traj: Trajectory) -> MomentumDissipation:
        """J(t) − J(0) (symplectic) or J(t) − J(0)e^{−∫𝓡(H)dt} (contact) along a trajectory of X_H."""
        invariance = self.require_invariant(action, H)
        if traj.chart != action.chart:
            raise ChartMismatchError("Trajectory and action live on different charts")
        if len(traj) == 0:
            return MomentumDissipation(times=traj.times, residual=np.zeros(0), invariance_residual=invariance)

        J = np.array([self.momentum_array(action, x) for x in traj.states])
        if action.chart.kind == ChartKind.CONTACT:
            z = action.chart.z_index
            hz = np.array([self.hamiltonian.grad_array(H, x)[z] for x in traj.states])
            decay = np.exp(-cumulative_trapezoid(hz, traj.times, initial=0.0))
        else:
            decay = np.ones(len(traj))
        residual = np.max(np.abs(J - np.outer(decay, J[0])), axis=1)
        result = MomentumDissipation(times=traj.times, residual=residual, invariance_residual=invariance)
        self.logger.debug(f"Momentum dissipation for {action.label()}: max residual {result.max_residual:.3e}")
        return result
