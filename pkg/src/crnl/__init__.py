"""Continuous nonlocal low-rank recovery.

Observed data (a masked image, a noisy image, scattered samples, a colored
point cloud) is first fitted by a sinusoidal coordinate network, which is
then used to group similar regions of the domain; each group of translated
observations is fitted jointly by a low-rank function factorization with a
per-group core tensor and factor networks shared across groups. Predictions
are read from the group functions at the identity similarity index.
"""

from .grouping import (CubeGrid, Domain, GroupEntry, GroupIndex,
                       GroupObservedSet, assign_key_cubes, build_group_sets,
                       cube_distance, split_domain, top_s_similar)
from .inr import (CoordinateMap, FitConfig, ObservedSet, evaluate_grid,
                  fit_inr)
from .metrics import MetricReport, nrmse, psnr, r_square, ssim
from .model import (CRNLModel, TrainConfig, evaluate, evaluate_batch,
                    frank_bound_check, infer, lipschitz_bound_check,
                    load_model_checkpoint, predict_points, random_model,
                    save_model_checkpoint, train)
from .nets import (Adam, SineMLP, TrainingDiverged, load_net_checkpoint,
                   param_l1_bound, save_net_checkpoint, siren_init)
from .oracles import run_oracles
from .regularizers import energy_norm, tv_norm
from .seeding import rng_stream, stream_seed
from .synthetic import (SYNTHETIC_FUNCTIONS, add_noise, make_mask,
                        make_multiband_image, make_point_cloud,
                        sample_function, synthetic_function)
from .tasks import (TASK_DEFAULTS, TASK_NAMES, denoise_image, inpaint_image,
                    recover_point_cloud, regress_points, resolve_config,
                    run_task)
from .tensor_ops import (fold, frobenius_norm, l1_norm, mode_product,
                         numerical_tucker_rank, unfold)

__version__ = "0.1.0"
