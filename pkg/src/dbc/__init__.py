from src.dbc.losses import agent_diff_loss, bc_loss, dbc_objective, dm_loss, expert_diff_loss, total_loss
from src.dbc.models import DbcConfig, Policy, act
from src.dbc.trainer import init_policy, train_bc, train_policy

__all__ = [
    "agent_diff_loss", "bc_loss", "dbc_objective", "dm_loss", "expert_diff_loss", "total_loss",
    "DbcConfig", "Policy", "act",
    "init_policy", "train_bc", "train_policy",
]
