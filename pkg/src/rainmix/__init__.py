"""rainmix: depth-guided synthesis and evaluation of mixed rain degradations.

The toolkit renders rain streaks, adherent raindrops, and rainy haze onto
clean images guided by per-pixel depth, keeps every intermediate layer as
reproducible ground truth, and ships a reference implementation of the
matching image-quality metric and loss suite plus a numerically verified
hybrid normalization block.
"""

__version__ = "0.1.0"

from .raster import DepthMap, Image, Tensor4, TransmissionMap, downsample2x
from .fileio import ImageIOError, load_depth, load_image, read_pfm, save_image, write_pfm
from .recipes import (DropParams, HazeParams, RainRecipe, RecipeJitter,
                      StreakParams, load_recipe, save_recipe)
from .synthesis import (DropField, MorSample, compose_haze, compose_mor,
                        compose_rain_streaks, compose_raindrops,
                        haze_transmission, render_raindrops,
                        render_streak_pattern, streak_transmission)
from .metrics import (LossWeights, MetricsRecord, SsimParams, dark_channel,
                      dc_loss, depth_l1_loss, l1_image, lsgan_d_loss,
                      lsgan_g_loss, mse, ms_ssim, psnr, rec_loss, ssim,
                      total_loss, tv_loss)
from .normblocks import (AffineParams, SeluConstants, batch_norm, conv3x3,
                         hnb_block, hnb_normalize, instance_norm, selu)
from .pipeline import (EvalReport, ManifestRecord, NoPairsError, derive_seed,
                       eval_batch, eval_pair, read_manifest, stratify_by_depth,
                       synth_batch, synth_sample)

__all__ = [name for name in dir() if not name.startswith("_")]
