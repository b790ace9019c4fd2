from typing import List, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator

PHY_FIELDS = (
    'R', 'M', 'T_f', 'T_p', 'sigma2', 'gamma_th', 'epsilon', 'rician_k',
    'p_bar', 'D', 'sic_max_iters', 'cross_pool_cancel', 'background_replicas',
)


class SystemConfig(BaseModel):
    N: int = Field(30, ge=1, description="Number of devices")
    R: int = Field(3, ge=1, description="Number of receiver-side resource pools")
    M: int = Field(3, ge=1, description="Logical slots per pool per frame")
    T_f: float = Field(1.0, gt=0, description="Frame duration")
    T_p: float = Field(0.25, gt=0, description="Packet (replica) duration")
    sigma2: float = Field(0.5, gt=0, description="Receiver noise power")
    gamma_th: float = Field(2.0, gt=0, description="Capture SINR threshold (linear)")
    epsilon: float = Field(0.05, ge=0, le=1, description="Residual interference factor after cancellation")
    rician_k: Optional[float] = Field(10.0, ge=0, description="Rician K-factor (linear); None disables fading")
    p_bar: float = Field(4.0, gt=0, description="Nominal received power per replica")
    D: int = Field(3, ge=1, description="Maximum replicas per selected pool")
    delta_max: int = Field(200, ge=2, description="AoI truncation level")
    sic_max_iters: int = Field(64, ge=1, description="Cap on SIC iterations per pool")
    cross_pool_cancel: bool = Field(False, description="Cancel decoded packets in every pool before OR fusion")
    background_replicas: int = Field(1, ge=1, description="Replicas per background packet")

    @model_validator(mode='after')
    def _check_frame(self):
        if self.T_p > self.T_f / self.M * (1 + 1e-12):
            raise ValueError(f"T_p={self.T_p} exceeds the slot duration T_f/M={self.T_f / self.M}")
        if self.D > self.M:
            raise ValueError(f"D={self.D} exceeds the number of slots M={self.M}")
        if self.background_replicas > self.M:
            raise ValueError(f"background_replicas={self.background_replicas} exceeds M={self.M}")
        return self

    @property
    def T_s(self) -> float:
        """Logical slot duration."""
        return self.T_f / self.M

    @property
    def fading(self) -> bool:
        return self.rician_k is not None

    def phy_dict(self) -> dict:
        """The fields that influence the calibrated success law."""
        return {name: getattr(self, name) for name in PHY_FIELDS}


class Action(BaseModel):
    """Access action: d replicas in each of q selected pools; (0, 0) is idle."""
    model_config = ConfigDict(frozen=True)

    d: int = Field(ge=0, description="Replicas per selected pool")
    q: int = Field(ge=0, description="Number of selected pools")

    @model_validator(mode='after')
    def _check_idle(self):
        if (self.d == 0) != (self.q == 0):
            raise ValueError(f"({self.d},{self.q}) is not an action: only (0,0) may have a zero component")
        return self

    @property
    def energy(self) -> int:
        return self.d * self.q

    @property
    def is_idle(self) -> bool:
        return self.d == 0

    def sort_key(self):
        """Energy first, then d, then q; the tie-break order used by the solvers."""
        return (self.energy, self.d, self.q)

    def __str__(self):
        return f"({self.d},{self.q})"


IDLE = Action(d=0, q=0)


class PopulationConfig(BaseModel):
    N: int = Field(30, ge=1, description="Device count; the load formula uses N-1 interferers")
    R: int = Field(3, ge=1, description="Resource pools")
    T_f: float = Field(1.0, gt=0, description="Frame duration")

    @classmethod
    def from_system(cls, cfg: SystemConfig) -> 'PopulationConfig':
        return cls(N=cfg.N, R=cfg.R, T_f=cfg.T_f)


class FixedPointConfig(BaseModel):
    damp_load: float = Field(0.3, gt=0, le=1, description="Load damping factor beta")
    damp_dist: float = Field(0.5, gt=0, le=1, description="Distribution damping factor alpha_damp")
    tol_load: float = Field(1e-4, gt=0, description="Load residual tolerance")
    tol_dist: float = Field(1e-5, gt=0, description="L1 distribution residual tolerance")
    max_outer_iters: int = Field(500, ge=1, description="Maximum outer iterations")
    lambda_init: float = Field(0.0, ge=0, description="Initial per-pool load")
    rvi_tol: float = Field(1e-9, gt=0, description="Relative value iteration span tolerance")
    rvi_max_iters: int = Field(1_000_000, ge=1, description="Relative value iteration cap")


class CalibrationSettings(BaseModel):
    load_step: float = Field(2.0, gt=0, description="Spacing of the load grid")
    load_max: float = Field(24.0, ge=0, description="Upper end of the load grid (inclusive when on the step)")
    trials: int = Field(20_000, ge=1, description="Monte Carlo frames per table cell")
    workers: int = Field(1, ge=1, description="Worker processes for calibration cells")

    def grid(self) -> List[float]:
        count = int(self.load_max / self.load_step + 1e-9) + 1
        return [round(i * self.load_step, 12) for i in range(count)]


class SweepSettings(BaseModel):
    eta_min: float = Field(1e-3, gt=0, description="Smallest energy multiplier")
    eta_max: float = Field(1e2, gt=0, description="Largest energy multiplier")
    eta_points: int = Field(20, ge=1, description="Number of log-spaced multipliers")
    workers: int = Field(1, ge=1, description="Worker processes for the sweep")
    retries: int = Field(2, ge=0, description="Extra attempts, with halved damping, for non-converged points")

    @model_validator(mode='after')
    def _check_range(self):
        if self.eta_max < self.eta_min:
            raise ValueError("eta_max must not be smaller than eta_min")
        return self


class ValidationSettings(BaseModel):
    frames: int = Field(50_000, ge=1, description="Closed-loop frames")
    warmup: Optional[int] = Field(None, ge=0, description="Warmup frames; default max(500, frames // 10)")
    report_threshold: float = Field(0.15, gt=0, description="Relative gap above which a closed-loop run is flagged")

    def effective_warmup(self) -> int:
        if self.warmup is not None:
            return self.warmup
        return min(max(500, self.frames // 10), max(self.frames - 1, 0))


class ExperimentConfig(BaseModel):
    seed: int = Field(7, ge=0, description="Master seed for every random stream")
    system: SystemConfig = Field(default_factory=SystemConfig)
    fixed_point: FixedPointConfig = Field(default_factory=FixedPointConfig)
    calibration: CalibrationSettings = Field(default_factory=CalibrationSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)
    validation: ValidationSettings = Field(default_factory=ValidationSettings)
