from src.guidance.diffusion_policy import act_diffusion_policy, dp_loss, train_diffusion_policy
from src.guidance.ebm import act_ibc, ebm_guidance_loss, infonce_loss, train_ebm, train_ebm_guided_policy
from src.guidance.gan import disc_loss, generator_loss, train_gan_bc
from src.guidance.guided import fit_guided_policy
from src.guidance.models import CondDiffusionPolicy, EnergyModel, GanPair, VaeModel
from src.guidance.registry import METHODS, get_method, train_method
from src.guidance.vae import train_vae, train_vae_guided_policy, vae_guidance_loss, vae_loss

__all__ = [
    "EnergyModel", "VaeModel", "GanPair", "CondDiffusionPolicy",
    "train_ebm", "infonce_loss", "ebm_guidance_loss", "train_ebm_guided_policy", "act_ibc",
    "train_vae", "vae_loss", "vae_guidance_loss", "train_vae_guided_policy",
    "train_gan_bc", "disc_loss", "generator_loss",
    "train_diffusion_policy", "dp_loss", "act_diffusion_policy",
    "fit_guided_policy", "METHODS", "get_method", "train_method",
]
