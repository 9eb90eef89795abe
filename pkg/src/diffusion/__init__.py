from src.diffusion.model import DiffLossTerm, NoiseModel, diff_loss, forward_noise, timestep_embedding
from src.diffusion.sampling import GridSpec, gradient_field, reconstruction_mse, reverse_from, sample, write_field_csv
from src.diffusion.schedule import DiffusionSchedule, make_schedule, scaled_schedule
from src.diffusion.trainer import schedule_from_config, train_diffusion

__all__ = [
    "DiffLossTerm", "NoiseModel", "diff_loss", "forward_noise", "timestep_embedding",
    "GridSpec", "gradient_field", "reconstruction_mse", "reverse_from", "sample", "write_field_csv",
    "DiffusionSchedule", "make_schedule", "scaled_schedule",
    "schedule_from_config", "train_diffusion",
]
