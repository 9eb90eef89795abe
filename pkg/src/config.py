import os
from dotenv import load_dotenv
from pydantic import BaseModel

load_dotenv()

class AppSettings(BaseModel):
    # Runtime
    DBC_SEED: int = int(os.getenv("DBC_SEED", "0"))
    DBC_OUT_DIR: str = os.getenv("DBC_OUT_DIR", "runs")
    DBC_LOG_LEVEL: str = os.getenv("DBC_LOG_LEVEL", "INFO")
    DBC_MAX_CONCURRENT_EPISODES: int = int(os.getenv("DBC_MAX_CONCURRENT_EPISODES", "8"))

    # Diffusion defaults (Maze column)
    DEFAULT_DIFFUSION_STEPS: int = 100
    DEFAULT_BETA_START: float = 1e-4
    DEFAULT_BETA_END: float = 0.02
    # Betas above are quoted for a 1000-step chain and rescaled to the configured N
    DEFAULT_BETA_REFERENCE_STEPS: int = 1000
    DEFAULT_DM_HIDDEN_DIM: int = 128
    DEFAULT_DM_NUM_LAYERS: int = 5
    DEFAULT_DM_LR: float = 1e-4
    DEFAULT_DM_EPOCHS: int = 8000

    # Policy defaults (Maze column)
    DEFAULT_POLICY_HIDDEN_DIM: int = 256
    DEFAULT_POLICY_NUM_LAYERS: int = 4
    DEFAULT_POLICY_LR: float = 5e-5
    DEFAULT_POLICY_EPOCHS: int = 2000
    DEFAULT_BATCH_SIZE: int = 128
    DEFAULT_LAMBDA: float = 30.0

    # Baseline defaults
    DEFAULT_N_NEG: int = 64
    DEFAULT_LAMBDA_EBM: float = 0.1
    DEFAULT_LAMBDA_VAE: float = 1.0
    DEFAULT_LAMBDA_GAN: float = 0.2
    DEFAULT_IBC_SAMPLES: int = 1000
    DEFAULT_IBC_ITERS: int = 3

    # Evaluation
    DEFAULT_EVAL_EPISODES: int = 100
    DEFAULT_DEMO_EPISODES: int = 100

    def validate_env(self):
        if self.DBC_MAX_CONCURRENT_EPISODES < 1:
            raise ValueError("DBC_MAX_CONCURRENT_EPISODES must be at least 1.")

# Global Settings Instance
settings = AppSettings()
