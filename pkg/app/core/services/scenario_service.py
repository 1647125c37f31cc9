"""
Scenario runner behind the command-line front end.

`parse_scenario` turns a JSON document into a validated `Scenario`;
`run` executes one subcommand, writes the CSV/report pair and returns the
report. Checks are registered lazily per subcommand: a scenario that lists
no checks runs every check that applies to its system.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from pydantic import ValidationError

from app.config import Settings
from app.core.models.dynamics import Trajectory
from app.core.models.geometry import Chart, ChartKind, Point, PointPosition, SubmanifoldType
from app.core.models.hamiltonian import SUPPORTED_FAMILIES, ScalarField
from app.core.models.scenario import (
    CHECK_DEFAULTS,
    CheckResult,
    Command,
    Provenance,
    Report,
    Scenario,
)
from app.core.models.symmetry import ActionFamily, GroupAction
from app.core.services.corpus_service import CorpusService
from app.core.services.dynamics_service import DynamicsService
from app.core.services.geometry_service import GeometryService, eta_array
from app.core.services.hamiltonian_service import HamiltonianService
from app.core.services.reduction_service import ReductionService
from app.core.services.symmetry_service import SymmetryService
from app.core.services.symplectification_service import SymplectificationService
from app.core.utils.exceptions import OutputError, ScenarioError, ValidationException
from app.core.utils.sampling import run_batched

logger = logging.getLogger(__name__)

# Tangent spaces sampled per corpus submanifold
CORPUS_POINTS = 100

CheckFn = Callable[[], float]


class _Run:
    """Mutable state of one subcommand run."""

    def __init__(self, command: Command, scenario: Scenario, seed: int, samples: int):
        self.command = command
        self.scenario = scenario
        self.seed = seed
        self.samples = samples
        self.checks: Dict[str, CheckFn] = {}
        self.results: Dict[str, object] = {}
        self.trajectory: Optional[Trajectory] = None

    def rng(self, offset: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, offset])

    def corpus_points(self) -> int:
        return min(self.samples, CORPUS_POINTS)


class ScenarioService:
    """Parses scenarios and runs the seven subcommands."""

    def __init__(
        self,
        settings: Settings,
        geometry: GeometryService,
        hamiltonian: HamiltonianService,
        dynamics: DynamicsService,
        symmetry: SymmetryService,
        reduction: ReductionService,
        symplectification: SymplectificationService,
        corpus: CorpusService,
    ):
        self.settings = settings
        self.geometry = geometry
        self.hamiltonian = hamiltonian
        self.dynamics = dynamics
        self.symmetry = symmetry
        self.reduction = reduction
        self.symplectification = symplectification
        self.corpus = corpus
        self.logger = logging.getLogger(__name__)

        self._handlers: Dict[Command, Callable[[_Run], None]] = {
            Command.SIMULATE: self._simulate,
            Command.INVARIANTS: self._invariants,
            Command.REDUCE: self._reduce,
            Command.RECONSTRUCT: self._reconstruct,
            Command.SYMPLECTIFY: self._symplectify,
            Command.COMMUTE: self._commute,
            Command.CLASSIFY: self._classify,
        }

    # ------------------------------------------------------------------
    # Parsing
    # ------------------------------------------------------------------

    def parse_scenario(self, text: Union[str, bytes]) -> Scenario:
        """Validate a JSON scenario; field errors carry their dotted paths."""
        try:
            data = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ScenarioError(f"Scenario is not valid JSON: {e}", errors=[{"path": "", "message": str(e)}])
        if not isinstance(data, dict):
            raise ScenarioError("Scenario must be a JSON object", errors=[{"path": "", "message": "expected an object"}])

        try:
            return Scenario.model_validate(data)
        except ValidationError as e:
            errors = []
            for err in e.errors():
                message = err["msg"]
                if err["type"] in ("union_tag_invalid", "union_tag_not_found"):
                    message = f"{message}; supported families: {', '.join(SUPPORTED_FAMILIES)}"
                errors.append({"path": ".".join(str(p) for p in err["loc"]), "message": message})
            summary = "; ".join(f"{err['path'] or '<root>'}: {err['message']}" for err in errors)
            raise ScenarioError(f"Invalid scenario: {summary}", errors=errors)

    def load_scenario(self, path: Union[str, Path]) -> Scenario:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ScenarioError(f"Scenario file not found: {path}", errors=[{"path": "", "message": "file not found"}])
        except OSError as e:
            raise OutputError(f"Cannot read {path}: {e}", details={"path": str(path)})
        self.logger.debug(f"Loaded scenario from {path}")
        return self.parse_scenario(text)

    def config_hash(self, scenario: Scenario) -> str:
        canonical = json.dumps(scenario.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    # ------------------------------------------------------------------
    # Running
    # ------------------------------------------------------------------

    def run(
        self,
        command: Union[Command, str],
        scenario: Scenario,
        out_dir: Optional[Union[str, Path]] = None,
        seed: Optional[int] = None,
        samples: Optional[int] = None,
    ) -> Report:
        """Execute one subcommand and write its outputs."""
        command = Command(command)
        seed = scenario.seed if seed is None else seed
        if samples is None:
            samples = scenario.samples if scenario.samples is not None else self.settings.default_samples
        if not 0 <= seed < 2 ** 64:
            raise ValidationException(f"Seed must be a 64-bit unsigned integer, got {seed}")
        if samples < 0:
            raise ValidationException(f"Sample count must be non-negative, got {samples}")

        state = _Run(command, scenario, seed, samples)
        self._handlers[command](state)
        selected = self._select_checks(state)

        results = []
        for check_id in selected:
            residual = float(state.checks[check_id]())
            tolerance = scenario.tolerance(check_id)
            passed = bool(np.isfinite(residual) and residual < tolerance)
            if not passed:
                self.logger.warning(f"⚠️ Check {check_id} failed: residual {residual:.3e} >= tolerance {tolerance:.3e}")
            else:
                self.logger.debug(f"Check {check_id}: residual {residual:.3e} < {tolerance:.3e}")
            results.append(CheckResult(id=check_id, residual=residual, tolerance=tolerance, passed=passed))

        report = Report(
            checks=results,
            provenance=Provenance(
                command=command,
                seed=seed,
                samples=samples,
                config_hash=self.config_hash(scenario),
                scenario=scenario.name,
            ),
            results=state.results,
        )

        out = Path(self.settings.output_dir if out_dir is None else out_dir)
        if state.trajectory is not None:
            self.dynamics.write_csv(state.trajectory, self._output_path(out, scenario.outputs.csv, f"{command.value}.csv"))
        self.write_report(report, self._output_path(out, scenario.outputs.report, f"{command.value}_report.json"))
        return report

    def _select_checks(self, state: _Run) -> List[str]:
        requested = [c.id for c in state.scenario.checks]
        if not requested:
            return sorted(state.checks)

        for check_id in requested:
            if state.command not in CHECK_DEFAULTS[check_id].commands:
                raise ValidationException(
                    f"Check '{check_id}' does not belong to the {state.command.value} command",
                    details={"commands": [c.value for c in CHECK_DEFAULTS[check_id].commands]}
                )
            if check_id not in state.checks:
                raise ValidationException(
                    f"Check '{check_id}' does not apply to this scenario",
                    details={"applicable": sorted(state.checks)}
                )
        return list(dict.fromkeys(requested))

    def _output_path(self, out: Path, configured: Optional[str], default: str) -> Path:
        if configured is None:
            return out / default
        path = Path(configured)
        return path if path.is_absolute() else out / path

    def write_report(self, report: Report, path: Path) -> Path:
        """Sorted keys and no timestamps, so identical runs give identical bytes."""
        text = json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise OutputError(f"Cannot write {path}: {e}", details={"path": str(path)})
        self.logger.info(f"📝 Wrote report to {path}")
        return path

    # ------------------------------------------------------------------
    # Scenario pieces
    # ------------------------------------------------------------------

    def _hamiltonian(self, scenario: Scenario) -> ScalarField:
        if scenario.system.hamiltonian is None:
            raise ValidationException("This command needs system.hamiltonian", details={"supported": SUPPORTED_FAMILIES})
        return self.hamiltonian.build(scenario.system.hamiltonian, scenario.chart())

    def _initial_point(self, scenario: Scenario) -> Point:
        if scenario.initial_state is None:
            raise ValidationException("This command needs initial_state")
        return Point(chart=scenario.chart(), coords=scenario.initial_state)

    def _action(self, scenario: Scenario) -> GroupAction:
        if scenario.action is None:
            raise ValidationException("This command needs an action", details={"families": [f.value for f in ActionFamily]})
        return self.symmetry.action(scenario.action.family, scenario.chart(), scenario.action.k)

    def _batched(self, state: _Run, check: Callable[[np.random.Generator], float]) -> CheckFn:
        def run() -> float:
            return run_batched(
                self.settings,
                lambda rng, size: max((check(rng) for _ in range(size)), default=0.0),
                state.seed,
                state.samples,
            )
        return run

    # ------------------------------------------------------------------
    # simulate / invariants
    # ------------------------------------------------------------------

    def _trajectory_checks(self, state: _Run, H: ScalarField, action: Optional[GroupAction]) -> Trajectory:
        scenario = state.scenario
        x0 = self._initial_point(scenario)
        momentum = None
        if action is not None:
            momentum = lambda x: self.symmetry.momentum_array(action, x)

        traj = self.dynamics.simulate(H, x0, scenario.integrator)
        if momentum is not None:
            J = np.array([momentum(x) for x in traj.states]).reshape(len(traj), -1)
            traj = traj.with_observables({f"J{i + 1}": J[:, i] for i in range(J.shape[1])})
        report = self.dynamics.monitor(traj, H, momentum)
        state.results["invariants"] = report.model_dump(exclude_none=True)
        state.results["final_state"] = traj.final.coords.tolist() if len(traj) else []
        state.trajectory = traj

        if report.energy_drift is not None:
            state.checks["energy_drift"] = lambda: report.energy_drift
        if report.relative_decay_residual is not None:
            state.checks["dissipation_decay"] = lambda: report.relative_decay_residual

        spec = scenario.system.hamiltonian
        if spec.family == "contact_damped" and spec.base.family == "separable_mechanical":
            state.checks["damped_newton"] = lambda: self._damped_newton_residual(traj, H, spec.base.mass, spec.gamma)
            potential = spec.base.potential
            if (
                state.command == Command.SIMULATE
                and scenario.system.n == 1
                and potential.kind in ("harmonic", "zero")
            ):
                stiffness = potential.stiffness if potential.kind == "harmonic" else 0.0
                state.checks["analytic_damped"] = lambda: self._analytic_damped_residual(
                    traj, spec.base.mass, stiffness, spec.gamma
                )
        return traj

    def _damped_newton_residual(self, traj: Trajectory, H: ScalarField, mass: float, gamma: float) -> float:
        """max |q̈ + γq̇ + U'(q)/m| by central differences away from the ends."""
        if len(traj) < 5:
            return 0.0
        q = traj.states[:, traj.chart.q_slice]
        qdot = np.gradient(q, traj.times, axis=0)
        qddot = np.gradient(qdot, traj.times, axis=0)
        force = np.array([self.hamiltonian.grad_array(H, x)[traj.chart.q_slice] for x in traj.states])
        residual = qddot + gamma * qdot + force / mass
        return float(np.max(np.abs(residual[2:-2])))

    def _analytic_damped_residual(self, traj: Trajectory, mass: float, stiffness: float, gamma: float) -> float:
        """max |q(t) − q_exact(t)| for q̈ + γq̇ + (k/m)q = 0."""
        t = traj.times - traj.times[0]
        q0 = float(traj.states[0, 0])
        v0 = float(traj.states[0, 1]) / mass
        disc = stiffness / mass - 0.25 * gamma * gamma
        b = v0 + 0.5 * gamma * q0
        if disc > 0:
            w = np.sqrt(disc)
            shape = q0 * np.cos(w * t) + b * np.sin(w * t) / w
        elif disc < 0:
            w = np.sqrt(-disc)
            shape = q0 * np.cosh(w * t) + b * np.sinh(w * t) / w
        else:
            shape = q0 + b * t
        exact = np.exp(-0.5 * gamma * t) * shape
        return float(np.max(np.abs(traj.states[:, 0] - exact)))

    def _simulate(self, state: _Run) -> None:
        H = self._hamiltonian(state.scenario)
        action = self._action(state.scenario) if state.scenario.action is not None else None
        self._trajectory_checks(state, H, action)

    def _invariants(self, state: _Run) -> None:
        scenario = state.scenario
        H = self._hamiltonian(scenario)
        chart = scenario.chart()
        action = self._action(scenario) if scenario.action is not None else None

        if scenario.initial_state is not None:
            traj = self._trajectory_checks(state, H, action)
            if chart.kind == ChartKind.CONTACT:
                if len(traj) >= 3:
                    state.checks["dissipation_law"] = lambda: state.results["invariants"].get("dissipation_residual", 0.0)
                state.checks["volume"] = lambda: self.dynamics.variational_volume(traj, H).max_ratio_error
            if action is not None:
                state.checks["momentum_dissipation"] = lambda: self.symmetry.momentum_dissipation_check(
                    action, H, traj
                ).max_residual

        def energy_law(rng: np.random.Generator) -> float:
            pt = self.geometry.random_point(chart, rng)
            g = self.hamiltonian.grad_array(H, pt.coords)
            dH = float(g @ self.hamiltonian.xh_array(H, pt.coords))
            if chart.kind == ChartKind.CONTACT:
                return abs(dH + H.evaluate(pt) * float(g[chart.z_index]))
            return abs(dH)

        def divergence(rng: np.random.Generator) -> float:
            pt = self.geometry.random_point(chart, rng)
            if chart.kind == ChartKind.CONTACT:
                g = self.hamiltonian.grad_array(H, pt.coords)
                return abs(self.hamiltonian.divergence_contact(H, pt) + (chart.n + 1) * float(g[chart.z_index]))
            return abs(self.hamiltonian.divergence_symplectic(H, pt))

        state.checks["energy_law"] = self._batched(state, energy_law)
        state.checks["divergence"] = self._batched(state, divergence)

        if action is not None:
            state.checks["momentum_condition"] = self._batched(
                state, lambda rng: self.symmetry.check_momentum_condition(action, self.geometry.random_point(chart, rng))
            )
            state.checks["equivariance"] = self._batched(
                state,
                lambda rng: self.symmetry.check_equivariance(
                    action, self.symmetry.random_element(action, rng), self.geometry.random_point(chart, rng)
                ),
            )

    # ------------------------------------------------------------------
    # reduce / reconstruct
    # ------------------------------------------------------------------

    def _reduced(self, state: _Run):
        scenario = state.scenario
        H = self._hamiltonian(scenario)
        action = self._action(scenario)
        mu = scenario.action.mu
        reduced = self.reduction.reduce(action, H, mu)
        state.results["reduced_chart"] = reduced.reduced_chart.label()
        state.results["mu"] = reduced.mu.components.tolist()
        return H, action, reduced

    def _reduce(self, state: _Run) -> None:
        scenario = state.scenario
        H, action, reduced = self._reduced(state)

        def level_point(rng: np.random.Generator) -> np.ndarray:
            return self.reduction.random_level_point(reduced, rng)

        state.checks["section_identity"] = self._batched(
            state, lambda rng: self.reduction.section_identity_residual(reduced, reduced.project_array(level_point(rng)))
        )
        state.checks["reduced_hamiltonian"] = self._batched(
            state, lambda rng: self.reduction.check_reduced_hamiltonian(reduced, H, rng, samples=1)
        )
        if reduced.full_chart.kind == ChartKind.CONTACT:
            state.checks["reeb_projection"] = self._batched(
                state, lambda rng: self.reduction.check_reeb_projection(reduced, Point(chart=reduced.full_chart, coords=level_point(rng)))
            )
        if action.is_abelian:
            def tangency(rng: np.random.Generator) -> float:
                result = self.reduction.level_set_tangency_check(
                    action, Point(chart=reduced.full_chart, coords=level_point(rng)), reduced.mu
                )
                return max(result.complement_residual, result.orbit_containment_residual, result.vertical_residual or 0.0)
            state.checks["level_set_tangency"] = self._batched(state, tangency)

        if scenario.initial_state is not None:
            x0 = self._initial_point(scenario)
            commutation = self.reduction.check_commutation(H, reduced, x0, scenario.integrator)
            small = commutation.reduced
            state.trajectory = small.with_observables({"H": self.dynamics.energy_series(small, reduced.reduced_H)})
            state.results["max_deviation"] = commutation.max_deviation
            state.checks["commutation"] = lambda: commutation.max_deviation
            state.checks["level_set_invariance"] = lambda: self.reduction.check_level_set_invariance(
                commutation.full, action, reduced.mu
            )

    def _reconstruct(self, state: _Run) -> None:
        scenario = state.scenario
        H, action, reduced = self._reduced(state)
        x0 = self._initial_point(scenario)
        self.reduction.require_on_level_set(reduced, x0)

        small = self.dynamics.flow(reduced.vector_field, reduced.project(x0), scenario.integrator)
        result = self.reduction.reconstruct(small, reduced, H, x0)
        direct = self.dynamics.flow(self.hamiltonian.vector_field(H), x0, scenario.integrator, t_eval=small.times)
        if direct.states.shape != result.trajectory.states.shape:
            raise ValidationException("Direct and reconstructed runs produced different time grids")

        rebuilt = result.trajectory
        state.trajectory = rebuilt.with_observables({"H": self.dynamics.energy_series(rebuilt, H)})
        state.results["max_lsq_residual"] = result.max_lsq_residual
        state.checks["reconstruction"] = lambda: float(np.max(np.abs(rebuilt.states - direct.states)))
        state.checks["lsq_residual"] = lambda: result.max_lsq_residual

    # ------------------------------------------------------------------
    # symplectify / commute / classify
    # ------------------------------------------------------------------

    def _require_contact(self, scenario: Scenario) -> Chart:
        chart = scenario.chart()
        if chart.kind != ChartKind.CONTACT:
            raise ValidationException(
                "This command needs a contact system chart",
                details={"chart": chart.label()}
            )
        return chart

    def _submanifold_names(self, scenario: Scenario) -> List[str]:
        names = scenario.submanifolds or self.corpus.names()
        for name in names:
            self.corpus.get(name)
        return list(names)

    def _lift_disagreements(self, state: _Run) -> float:
        agreements = self.symplectification.legendrian_lagrangian_agreement(
            state.rng(1), points=state.corpus_points(), names=self._submanifold_names(state.scenario)
        )
        state.results["lift_agreement"] = [a.model_dump(mode="json") for a in agreements]
        return float(sum(1 for a in agreements if not a.agrees))

    def _symplectify(self, state: _Run) -> None:
        scenario = state.scenario
        base = self._require_contact(scenario)
        lifted_chart = self.symplectification.symplectified_chart(base)

        def lifted_point(rng: np.random.Generator) -> Point:
            return self.geometry.random_point(lifted_chart, rng)

        state.checks["nondegeneracy"] = self._batched(
            state, lambda rng: self.symplectification.nondegeneracy(lifted_point(rng)).relative_error
        )
        state.checks["closedness"] = self._batched(
            state, lambda rng: self.symplectification.closedness_residual(lifted_point(rng))
        )
        state.checks["exactness"] = self._batched(
            state, lambda rng: self.symplectification.exactness_residual(lifted_point(rng))
        )

        if state.corpus_points() > 0:
            state.checks["lift_agreement"] = lambda: self._lift_disagreements(state)
            coisotropic = [
                name for name in self._submanifold_names(scenario)
                if self.corpus.get(name).expected == SubmanifoldType.COISOTROPIC
            ]
            if coisotropic:
                def lifted_complement() -> float:
                    rng = state.rng(2)
                    worst = 0.0
                    for name in coisotropic:
                        samples = self.corpus.samples(name, rng, state.corpus_points())
                        result = self.symplectification.lifted_complement_check(samples, rng.standard_normal(len(samples)))
                        worst = max(worst, result.residual, result.t_component, result.eta_residual)
                    return worst
                state.checks["lifted_complement"] = lifted_complement

        if scenario.action is not None:
            action = self._action(scenario)

            def lifted_momentum(rng: np.random.Generator) -> float:
                pt = lifted_point(rng)
                a = self.symplectification.lifted_momentum(action, pt).components
                b = self.symplectification.lifted_momentum_direct(action, pt).components
                return float(np.max(np.abs(a - b)))

            state.checks["lifted_momentum"] = self._batched(state, lifted_momentum)
            state.checks["lifted_invariance"] = self._batched(
                state,
                lambda rng: self.symplectification.lifted_action_invariance_check(
                    action, self.symmetry.random_element(action, rng), lifted_point(rng), rng
                ),
            )

    def _commute(self, state: _Run) -> None:
        scenario = state.scenario
        base = self._require_contact(scenario)
        action = self._action(scenario)
        if ActionFamily(action.family) != ActionFamily.CONTACT_TRANSLATION:
            raise ValidationException("commute needs a contact_translation action", details={"action": action.label()})

        report = self.symplectification.commutativity_check(
            base.n,
            action.k,
            mu=scenario.action.mu,
            samples=state.samples,
            seed=state.seed,
            probe_mu=scenario.probe_mu,
        )
        state.results["commutativity"] = report.model_dump(mode="json")
        state.checks["commutativity"] = lambda: report.max_residual
        state.checks["representative_independence"] = lambda: report.representative_residual
        state.checks["lifted_level_set"] = lambda: report.level_residual

    def _classify(self, state: _Run) -> None:
        scenario = state.scenario
        base = self._require_contact(scenario)

        if state.corpus_points() > 0:
            state.checks["classification"] = lambda: self._classification_mismatches(state)
            state.checks["lift_agreement"] = lambda: self._lift_disagreements(state)
            state.checks["complement_dimensions"] = lambda: self._dimension_mismatches(state)

        symplectic = Chart(kind=ChartKind.SYMPLECTIC, n=base.n) if base.n >= 1 else None

        def flat_sharp(rng: np.random.Generator) -> float:
            pt = self.geometry.random_point(base, rng)
            v = self.geometry.random_vector(pt, rng)
            back = self.geometry.sharp_contact(pt, self.geometry.flat_contact(pt, v)).components
            residual = float(np.max(np.abs(back - v.components))) / max(1.0, float(np.max(np.abs(v.components))))
            if symplectic is not None:
                spt = self.geometry.random_point(symplectic, rng)
                sv = self.geometry.random_vector(spt, rng)
                sback = self.geometry.sharp_symplectic(spt, self.geometry.flat_symplectic(spt, sv)).components
                residual = max(residual, float(np.max(np.abs(sback - sv.components))))
            return residual

        def sharp_lambda(rng: np.random.Generator) -> float:
            pt = self.geometry.random_point(base, rng)
            kernel = self.geometry.sharp_lambda(pt, self.geometry.eta_covector(pt)).components
            a = self.geometry.covector(pt, rng.standard_normal(base.dim))
            image = self.geometry.sharp_lambda(pt, a).components
            eta = eta_array(base, pt.coords)
            return max(float(np.max(np.abs(kernel))), abs(float(eta @ image)))

        state.checks["flat_sharp"] = self._batched(state, flat_sharp)
        state.checks["sharp_lambda"] = self._batched(state, sharp_lambda)

    def _classification_mismatches(self, state: _Run) -> float:
        rng = state.rng(3)
        verdicts = {}
        mismatches = 0
        for name in self._submanifold_names(state.scenario):
            entry = self.corpus.get(name)
            samples = self.corpus.samples(name, rng, state.corpus_points())
            base = self.geometry.classify_submanifold(samples)
            lifted = self.geometry.classify_submanifold(
                self.symplectification.lift_submanifold(samples, rng.standard_normal(len(samples)))
            )
            verdicts[name] = {"verdict": base.verdict, "lifted_verdict": lifted.verdict}
            mismatches += int(base.verdict != entry.expected) + int(lifted.verdict != entry.expected_lifted)
            if base.verdict != entry.expected:
                self.logger.warning(f"⚠️ {name}: classified {base.verdict}, expected {entry.expected}")
        state.results["classification"] = verdicts
        return float(mismatches)

    def _dimension_mismatches(self, state: _Run) -> float:
        """dim (TN)^{⊥_Λ} is 2n − k at horizontal points and 2n + 1 − k otherwise.

        At horizontal points (TN)^{⊥_Λ} must also equal (TN)^{⊥_dη} ∩ ker η.
        """
        rng = state.rng(4)
        mismatches = 0
        for name in self._submanifold_names(state.scenario):
            for B in self.corpus.samples(name, rng, state.corpus_points()):
                n, k = B.chart.n, B.rank
                horizontal = self.geometry.classify_point(B) == PointPosition.HORIZONTAL
                expected = 2 * n - k if horizontal else 2 * n + 1 - k
                complement = self.geometry.complement_lambda(B)
                mismatches += int(complement.rank != expected)
                if horizontal:
                    restricted = self.geometry.horizontal_part(self.geometry.complement_deta(B))
                    mismatches += int(not self.geometry.same_span(restricted, complement))
        return float(mismatches)
