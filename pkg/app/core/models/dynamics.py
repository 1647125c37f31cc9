from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.models.geometry import Chart, Point


class IntegratorMethod(str, Enum):
    """Integration schemes."""
    RK4 = "rk4"
    RK45 = "rk45"


class IntegratorConfig(BaseModel):
    """How a flow is integrated and recorded."""
    method: IntegratorMethod = Field(default=IntegratorMethod.RK4, description="Fixed-step RK4 or adaptive RK45")
    step: float = Field(default=1e-3, gt=0, allow_inf_nan=False, description="Fixed step size (RK4)")
    rel_tol: float = Field(default=1e-9, gt=0, description="Relative tolerance (RK45)")
    abs_tol: float = Field(default=1e-12, gt=0, description="Absolute tolerance (RK45)")
    t_span: Tuple[float, float] = Field(default=(0.0, 1.0), description="Start and end time")
    record_every: int = Field(default=1, ge=1, description="Record every k-th step; the final state is always kept")

    @model_validator(mode="after")
    def _check_span(self) -> "IntegratorConfig":
        t0, t1 = self.t_span
        if not (np.isfinite(t0) and np.isfinite(t1)) or t1 <= t0:
            raise ValueError(f"t_span must satisfy t1 > t0, got {self.t_span}")
        return self

    @property
    def duration(self) -> float:
        return self.t_span[1] - self.t_span[0]

    model_config = ConfigDict(extra="forbid", use_enum_values=True)


class Trajectory(BaseModel):
    """Recorded integral curve: time grid, states (rows) and observable series."""
    chart: Chart
    times: np.ndarray
    states: np.ndarray = Field(..., description="Shape (len(times), chart.dim)")
    observables: Dict[str, np.ndarray] = Field(default_factory=dict)

    @field_validator("times", "states", mode="before")
    @classmethod
    def _coerce(cls, value: Any) -> np.ndarray:
        return np.asarray(value, dtype=np.float64)

    @model_validator(mode="after")
    def _check_shapes(self) -> "Trajectory":
        if self.states.size == 0:
            self.states = np.zeros((0, self.chart.dim))
        if self.states.ndim != 2 or self.states.shape[1] != self.chart.dim:
            raise ValueError(f"states must have shape (N, {self.chart.dim}), got {self.states.shape}")
        if self.states.shape[0] != self.times.shape[0]:
            raise ValueError("times and states differ in length")
        if self.times.shape[0] > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, series in self.observables.items():
            if len(series) != self.times.shape[0]:
                raise ValueError(f"observable {name} has length {len(series)}, expected {self.times.shape[0]}")
        return self

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def point(self, i: int) -> Point:
        return Point(chart=self.chart, coords=self.states[i])

    def points(self) -> List[Point]:
        return [self.point(i) for i in range(len(self))]

    @property
    def final(self) -> Point:
        return self.point(-1)

    def with_observables(self, observables: Dict[str, np.ndarray]) -> "Trajectory":
        merged = dict(self.observables)
        merged.update({k: np.asarray(v, dtype=np.float64) for k, v in observables.items()})
        return Trajectory(chart=self.chart, times=self.times, states=self.states, observables=merged)

    model_config = ConfigDict(arbitrary_types_allowed=True)


class InvariantReport(BaseModel):
    """Along-flow invariant residuals. Fields stay None when they do not apply."""
    samples: int = 0
    initial_energy: Optional[float] = None
    energy_drift: Optional[float] = Field(None, description="max |H(t) − H(0)| when ∂H/∂z vanishes")
    decay_rate: Optional[float] = Field(None, description="Constant 𝓡(H) when it is constant along the run")
    decay_residual: Optional[float] = Field(None, description="max |H(t) − H(0)e^{−γt}|")
    relative_decay_residual: Optional[float] = None
    dissipation_residual: Optional[float] = Field(None, description="max |dH/dt + 𝓡(H)H| by central differences")
    momentum_drift: Optional[float] = Field(None, description="max |J(t) − J(0)e^{−∫𝓡(H)dt}|")

    @property
    def empty(self) -> bool:
        return self.samples < 2


class VolumeSeries(BaseModel):
    """Jacobian determinant of the flow against the contact volume law."""
    times: np.ndarray
    determinant: np.ndarray
    expected: np.ndarray
    ratio: np.ndarray

    @property
    def max_ratio_error(self) -> float:
        if self.ratio.size == 0:
            return 0.0
        return float(np.max(np.abs(self.ratio - 1.0)))

    model_config = ConfigDict(arbitrary_types_allowed=True)
