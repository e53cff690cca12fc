"""fslhdnn: few-shot on-device learning pipeline.

Weight-clustered CNN feature extraction with partial-sum reuse, an
LFSR-driven cyclic random projection encoder, single-pass HDC training
with L1-distance inference, early-exit inference, and analytic op-count
cost models.
"""

from .classifier import (ClassMemory, Prediction, infer, knn_l1_baseline,
                         train_batched, train_single_pass,
                         CLASS_MEMORY_BUDGET_BITS)
from .clustering import (ClusteredLayer, cluster_layer, compression_ratio,
                         op_reduction_ratio, reconstruct)
from .cost import (CostBreakdown, cost_fsl_hdnn, cost_full_ft, cost_partial_ft,
                   estimate_ft_phases, hdc_cost_per_sample)
from .crp import (CrpConfig, Hypervector, crp_memory_bits, dense_memory_bits,
                  encode, encode_batch, generate_block, lfsr_next, materialize)
from .early_exit import (BranchSetup, ExitPolicy, ExitTrace, branch_setup,
                         exit_statistics, infer_early_exit, train_branches)
from .episodes import (EpisodeSpec, FeatureDataset, make_synthetic_dataset,
                       run_episode, run_episodes, sample_episode)
from .errors import FormatError, FslError, NumericError, ValidationError
from .extractor import (AvgPoolGlobal, BlockBoundary, BranchFeature, Conv,
                        ElementwiseAdd, Mark, MaxPool, ModelGraph, OpCounts,
                        ReLU, RunResult, conv_clustered, conv_direct, run_model)
from .model_io import (load_class_memory, load_clustered, load_model,
                       save_class_memory, save_clustered, save_model)
from .models import (ImageDataset, cluster_model, make_small_cnn,
                     make_synthetic_images)
from .numerics import (DType, QuantParams, Tensor, bf16_round, dequantize,
                       is_bf16, quantize_features, tensor)
from .tensor_io import load_tensor, save_tensor

__version__ = "0.1.0"
