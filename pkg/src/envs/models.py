from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field

Vec2 = Tuple[float, float]

SPIRAL_SCHEDULE: Tuple[Vec2, ...] = ((0.5, 0.0), (0.0, 0.5), (-0.7, 0.0), (0.0, -0.7))


class Dynamics(BaseModel):
    """Double-integrator point mass shared by both worlds."""
    model_config = ConfigDict(frozen=True)

    dt: float = Field(default=0.1, gt=0.0, description="Seconds per step")
    max_speed: float = Field(default=2.0, gt=0.0)
    max_accel: float = Field(default=1.0, gt=0.0)
    damping: float = Field(default=0.95, gt=0.0, le=1.0, description="Per-step velocity retention")


class PointMassWorld(Dynamics):
    """5 x 5 open maze navigated from a fixed start to a goal drawn from a band."""
    low: float = 0.0
    high: float = 5.0
    goal_radius: float = Field(default=0.15, gt=0.0)
    max_steps: int = Field(default=400, ge=1)
    start: Vec2 = (5.0, 3.0)
    goal_disk_radius: float = Field(default=0.25, ge=0.0)
    train_centers: Tuple[Vec2, ...] = ((1.0, 2.0), (1.0, 4.0))
    eval_centers: Tuple[Vec2, ...] = ((1.0, 1.0), (1.0, 3.0), (1.0, 5.0))
    kp: float = Field(default=2.0, description="Scripted expert position gain")
    kd: float = Field(default=1.5, description="Scripted expert velocity gain")

    @property
    def obs_dim(self) -> int:
        return 6


class SpiralWorld(Dynamics):
    """Unbounded plane; a scripted spiral from the origin defines the target end point."""
    success_radius: float = Field(default=0.1, gt=0.0)
    segment_length: int = Field(default=40, ge=1)
    action_schedule: Tuple[Vec2, ...] = SPIRAL_SCHEDULE
    start_jitter: float = Field(default=0.05, ge=0.0, description="Radius of the random start disk")

    @property
    def max_steps(self) -> int:
        return self.segment_length * len(self.action_schedule)

    @property
    def obs_dim(self) -> int:
        return 4


class EnvState(BaseModel):
    model_config = ConfigDict(frozen=True)

    position: Vec2
    velocity: Vec2 = (0.0, 0.0)
    goal: Vec2 = (0.0, 0.0)
    step_index: int = Field(default=0, ge=0)
