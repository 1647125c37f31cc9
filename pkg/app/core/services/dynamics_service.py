import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from app.config import Settings
from app.core.models.dynamics import (
    IntegratorConfig,
    IntegratorMethod,
    InvariantReport,
    Trajectory,
    VolumeSeries,
)
from app.core.models.geometry import Chart, ChartKind, Point, TangentVector
from app.core.models.hamiltonian import ScalarField
from app.core.services.hamiltonian_service import HamiltonianService
from app.core.utils.exceptions import (
    BlowUpError,
    ChartMismatchError,
    IntegrationError,
    NumericalError,
    OutputError,
    StepUnderflowError,
    ValidationException,
)

logger = logging.getLogger(__name__)

ArrayField = Callable[[np.ndarray], np.ndarray]
MomentumFn = Callable[[np.ndarray], np.ndarray]


class DynamicsService:
    """Integration of vector fields, trajectory recording and along-flow invariant monitoring."""

    def __init__(self, settings: Settings, hamiltonian: HamiltonianService):
        self.settings = settings
        self.hamiltonian = hamiltonian
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------
    # Flows
    # ------------------------------------------------------------------

    def _array_field(self, field, chart: Chart) -> ArrayField:
        if hasattr(field, "array"):
            return field.array

        def wrapped(x: np.ndarray) -> np.ndarray:
            v = field(Point.model_construct(chart=chart, coords=x))
            return np.asarray(v.components if isinstance(v, TangentVector) else v, dtype=np.float64)

        return wrapped

    def flow(
        self,
        field,
        x0: Point,
        cfg: Optional[IntegratorConfig] = None,
        t_eval: Optional[np.ndarray] = None
    ) -> Trajectory:
        """Integrate ẋ = field(x) from x0 over cfg.t_span.

        `t_eval` pins the adaptive method's output grid (RK4 grids are already
        fixed by the config).
        """
        cfg = cfg or IntegratorConfig()
        f = self._array_field(field, x0.chart)
        method = IntegratorMethod(cfg.method)

        self.logger.debug(f"Integrating on {x0.chart.label()} with {method.value}, t_span={cfg.t_span}")
        if method == IntegratorMethod.RK4:
            traj = self._rk4(f, x0, cfg)
        else:
            traj = self._rk45(f, x0, cfg, t_eval)
        self.logger.info(f"Integration finished: {len(traj)} recorded states, t={traj.times[-1]:.6g}")
        return traj

    def _partial(self, chart: Chart, times: List[float], states: List[np.ndarray]) -> Trajectory:
        return Trajectory(chart=chart, times=np.asarray(times), states=np.asarray(states).reshape(-1, chart.dim))

    def _diverged(self, x: np.ndarray) -> bool:
        return not np.all(np.isfinite(x)) or float(np.max(np.abs(x), initial=0.0)) > self.settings.blowup_threshold

    def _rk4(self, f: ArrayField, x0: Point, cfg: IntegratorConfig) -> Trajectory:
        t0, t1 = cfg.t_span
        n_steps = max(1, math.ceil(cfg.duration / cfg.step - 1e-12))
        h = cfg.duration / n_steps
        x = np.array(x0.coords, dtype=np.float64)
        times, states = [t0], [x.copy()]

        for i in range(1, n_steps + 1):
            t = t0 + (i - 1) * h
            try:
                k1 = f(x)
                k2 = f(x + 0.5 * h * k1)
                k3 = f(x + 0.5 * h * k2)
                k4 = f(x + h * k3)
            except NumericalError as e:
                raise BlowUpError(
                    f"Vector field failed at t={t:.6g}: {e.message}",
                    trajectory=self._partial(x0.chart, times, states),
                    details={"t": t, **e.details}
                )
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

            if self._diverged(x):
                raise BlowUpError(
                    f"State left the finite region at t={t + h:.6g}",
                    trajectory=self._partial(x0.chart, times, states),
                    details={"t": t + h, "threshold": self.settings.blowup_threshold}
                )
            if i % cfg.record_every == 0 or i == n_steps:
                times.append(t1 if i == n_steps else t0 + i * h)
                states.append(x.copy())

        return self._partial(x0.chart, times, states)

    def _rk45(self, f: ArrayField, x0: Point, cfg: IntegratorConfig, t_eval: Optional[np.ndarray] = None) -> Trajectory:
        threshold = self.settings.blowup_threshold
        accepted_t: List[float] = [cfg.t_span[0]]
        accepted_x: List[np.ndarray] = [np.array(x0.coords)]

        def blowup(t, y):
            # solve_ivp evaluates events once per accepted step
            if t > accepted_t[-1]:
                accepted_t.append(float(t))
                accepted_x.append(np.array(y))
            if not np.all(np.isfinite(y)):
                return -1.0
            return threshold - float(np.max(np.abs(y)))

        blowup.terminal = True
        blowup.direction = -1

        def partial() -> Trajectory:
            return self._partial(x0.chart, accepted_t, accepted_x)

        try:
            sol = solve_ivp(
                lambda t, y: f(y),
                cfg.t_span,
                np.array(x0.coords),
                method="RK45",
                rtol=cfg.rel_tol,
                atol=cfg.abs_tol,
                t_eval=t_eval,
                events=blowup,
            )
        except NumericalError as e:
            raise BlowUpError(f"Vector field failed: {e.message}", trajectory=partial(), details=e.details)

        if sol.status == -1:
            raise StepUnderflowError(f"Adaptive integration failed: {sol.message}", trajectory=partial())
        if sol.status == 1:
            raise BlowUpError(
                f"State left the finite region at t={sol.t[-1]:.6g}",
                trajectory=partial(),
                details={"threshold": threshold}
            )

        steps = np.diff(np.asarray(accepted_t))
        if steps.shape[0] > 1 and float(np.min(steps[:-1])) < self.settings.min_adaptive_step:
            raise StepUnderflowError(
                "Adaptive step fell below the minimum step",
                trajectory=partial(),
                details={"min_step": self.settings.min_adaptive_step}
            )

        times = sol.t
        if t_eval is not None:
            return Trajectory(chart=x0.chart, times=times, states=sol.y.T)

        keep = np.arange(0, times.shape[0], cfg.record_every)
        if keep[-1] != times.shape[0] - 1:
            keep = np.append(keep, times.shape[0] - 1)
        return Trajectory(chart=x0.chart, times=times[keep], states=sol.y.T[keep])

    def simulate(self, H: ScalarField, x0: Point, cfg: Optional[IntegratorConfig] = None) -> Trajectory:
        """Flow of X_H with the energy (and dissipation) observables attached."""
        traj = self.flow(self.hamiltonian.vector_field(H), x0, cfg)
        return traj.with_observables(self.observe(traj, H))

    # ------------------------------------------------------------------
    # Observables
    # ------------------------------------------------------------------

    def energy_series(self, traj: Trajectory, H: ScalarField) -> np.ndarray:
        return np.array([H.value(x) for x in traj.states])

    def z_derivative_series(self, traj: Trajectory, H: ScalarField) -> np.ndarray:
        if traj.chart.kind != ChartKind.CONTACT:
            return np.zeros(len(traj))
        z = traj.chart.z_index
        return np.array([self.hamiltonian.grad_array(H, x)[z] for x in traj.states])

    def observe(self, traj: Trajectory, H: ScalarField, momentum: Optional[MomentumFn] = None) -> Dict[str, np.ndarray]:
        """Recompute observables from states: H, dissipation residual, J1..Jk."""
        if H.chart != traj.chart:
            raise ChartMismatchError(
                f"{H.name} lives on {H.chart.label()}, trajectory on {traj.chart.label()}",
                details={"field_chart": H.chart.label(), "trajectory_chart": traj.chart.label()}
            )
        energy = self.energy_series(traj, H)
        out: Dict[str, np.ndarray] = {"H": energy}
        if traj.chart.kind == ChartKind.CONTACT:
            out["dissipation_residual"] = self._dissipation_series(traj, energy, self.z_derivative_series(traj, H))
        if momentum is not None and len(traj):
            J = np.array([momentum(x) for x in traj.states]).reshape(len(traj), -1)
            for j in range(J.shape[1]):
                out[f"J{j + 1}"] = J[:, j]
        return out

    def _dissipation_series(self, traj: Trajectory, energy: np.ndarray, hz: np.ndarray) -> np.ndarray:
        if len(traj) < 3:
            return np.zeros(len(traj))
        dHdt = np.gradient(energy, traj.times, edge_order=2)
        return dHdt + hz * energy

    # ------------------------------------------------------------------
    # Monitoring
    # ------------------------------------------------------------------

    def monitor(self, traj: Trajectory, H: ScalarField, momentum: Optional[MomentumFn] = None) -> InvariantReport:
        """Along-flow invariant report for a recorded trajectory."""
        if len(traj) < 2:
            return InvariantReport(samples=len(traj))

        obs = self.observe(traj, H, momentum)
        energy = obs["H"]
        hz = self.z_derivative_series(traj, H)
        rel = traj.times - traj.times[0]
        report: Dict[str, Optional[float]] = {
            "samples": len(traj),
            "initial_energy": float(energy[0]),
        }

        if np.all(np.abs(hz) == 0.0):
            report["energy_drift"] = float(np.max(np.abs(energy - energy[0])))
        elif float(np.ptp(hz)) <= 1e-12 * max(1.0, float(np.max(np.abs(hz)))):
            gamma = float(hz[0])
            residual = float(np.max(np.abs(energy - energy[0] * np.exp(-gamma * rel))))
            report["decay_rate"] = gamma
            report["decay_residual"] = residual
            if energy[0] != 0.0:
                report["relative_decay_residual"] = residual / abs(float(energy[0]))

        if "dissipation_residual" in obs and len(traj) >= 3:
            report["dissipation_residual"] = float(np.max(np.abs(obs["dissipation_residual"])))

        if momentum is not None:
            J = np.array([momentum(x) for x in traj.states]).reshape(len(traj), -1)
            decay = np.exp(-cumulative_trapezoid(hz, traj.times, initial=0.0))
            report["momentum_drift"] = float(np.max(np.abs(J - np.outer(decay, J[0]))))

        result = InvariantReport(**report)
        self.logger.debug(f"Invariant report: {result.model_dump(exclude_none=True)}")
        return result

    def variational_volume(self, traj: Trajectory, H: ScalarField) -> VolumeSeries:
        """det DΦ_t along the trajectory against exp(−(n+1)∫𝓡(H)dt)."""
        if traj.chart.kind != ChartKind.CONTACT:
            raise ChartMismatchError("variational_volume needs a contact chart", details={"chart": traj.chart.label()})
        if len(traj) < 2:
            empty = np.zeros(len(traj))
            return VolumeSeries(times=traj.times, determinant=empty + 1.0, expected=empty + 1.0, ratio=empty + 1.0)

        dim = traj.chart.dim
        field = self.hamiltonian.vector_field(H).array

        def augmented(t, y):
            x = y[:dim]
            Phi = y[dim:].reshape(dim, dim)
            DX = self.hamiltonian.jacobian_array(field, x)
            return np.concatenate([field(x), (DX @ Phi).ravel()])

        y0 = np.concatenate([traj.states[0], np.eye(dim).ravel()])
        sol = solve_ivp(
            augmented,
            (traj.times[0], traj.times[-1]),
            y0,
            method="RK45",
            t_eval=traj.times,
            rtol=1e-10,
            atol=1e-12,
        )
        if not sol.success:
            raise IntegrationError(f"Variational integration failed: {sol.message}")

        det = np.array([np.linalg.det(y[dim:].reshape(dim, dim)) for y in sol.y.T])
        hz = self.z_derivative_series(traj, H)
        expected = np.exp(-(traj.chart.n + 1) * cumulative_trapezoid(hz, traj.times, initial=0.0))
        return VolumeSeries(times=traj.times, determinant=det, expected=expected, ratio=det / expected)

    # ------------------------------------------------------------------
    # CSV
    # ------------------------------------------------------------------

    def csv_columns(self, traj: Trajectory) -> List[str]:
        return ["t"] + traj.chart.coordinate_names() + list(traj.observables.keys())

    def write_csv(self, traj: Trajectory, path: Union[str, Path]) -> Path:
        """Header `t,<coords>,<observables>`, 17 significant digits."""
        path = Path(path)
        columns = [traj.times.reshape(-1, 1), traj.states] + [
            np.asarray(v).reshape(-1, 1) for v in traj.observables.values()
        ]
        table = np.hstack(columns) if len(traj) else np.zeros((0, len(self.csv_columns(traj))))
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(self.csv_columns(traj)), comments="")
        except OSError as e:
            raise OutputError(f"Cannot write {path}: {e}", details={"path": str(path)})
        self.logger.info(f"📝 Wrote {len(traj)} rows to {path}")
        return path

    def read_csv(self, path: Union[str, Path], chart: Chart) -> Trajectory:
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        coords = chart.coordinate_names()
        if header[:1 + len(coords)] != ["t"] + coords:
            raise ValidationException(
                f"CSV header does not match {chart.label()}",
                details={"expected": ["t"] + coords, "found": header[:1 + len(coords)]}
            )
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if table.size == 0:
            table = np.zeros((0, len(header)))
        observables = {name: table[:, 1 + len(coords) + j] for j, name in enumerate(header[1 + len(coords):])}
        return Trajectory(chart=chart, times=table[:, 0], states=table[:, 1:1 + len(coords)], observables=observables)
