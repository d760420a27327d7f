"""Flow matching toward line-valued targets.

When every data point comes with a line of equally valid variants (e.g. a
spectrogram under amplitude scaling or small time shifts), the conditional
probability path can aim at the nearest point of the line instead of one
arbitrary representative.  This package provides the matrix-free projection
geometry, the training objective, a calibrated Euler sampler, the STFT line
constructors, and a deterministic toy-scale experiment harness.
"""

from .geometry import (
    ConditionalDraw,
    DegenerateLineError,
    PathParams,
    VariantLine,
    conditional_velocity,
    distance_to_line,
    nearest_variant,
    ot_target_and_velocity,
    path_point,
    project,
    reject,
    sample_target,
    scale_orthogonal,
    target_mean,
)
from .net import (
    GradientSet,
    VectorFieldModel,
    adam_step,
    backward,
    embed_time,
    forward,
    init_model,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
)
from .flow import (
    PathBatch,
    PathSample,
    TrainConfig,
    TrainingDivergedError,
    cfm_loss,
    cfm_loss_grad,
    draw_path_sample,
    draw_training_batch,
    train,
)
from .sampler import (
    SampleResult,
    SamplerConfig,
    calibrate_blocks,
    euler_sample,
    vcs_calibrate,
)
from .spectral import (
    Spectrogram,
    StftConfig,
    dft,
    idft,
    istft,
    read_wav,
    scaling_line,
    shifting_line,
    stft,
    verify_scaling,
    verify_shifting,
)
from .tasks import ToyTask, task_2d_line, task_spectrogram_patch
from .estimator import FlowMatchingSampler
from .report import RunReport
from .bench import compare, oracle_transport_stats, path_length_stats, vcs_ablation

__version__ = "0.1.0"
