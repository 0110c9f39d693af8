"""Multi-view detector for AI-generated images.

Pipeline: decode -> resize/normalize -> spectral + moment + patch views
(+ an externally supplied 768-d semantic descriptor) -> fused MLP
classifier with a 49x49 patch-anomaly heatmap. See the README for the
file formats and the `spectra` command line tool.
"""

from .dataset import (DatasetReader, DatasetWriter, ManifestRow, MultiViewRecord,
                      content_id, decode_image, extract, extract_record,
                      extract_views, load_views, read_manifest, write_manifest)
from .degradation import LEVELS, DegradationLevel, apply_level, gaussian_blur, jpeg_reencode
from .errors import (ConfigError, FormatError, MissingEmbeddingError, NumericError,
                     ShapeError, SpectraError, UndefinedMetricError, UsageError)
from .evaluation import (MetricReport, accuracy, auc, average_precision,
                         compute_report, evaluate, mean_average_precision,
                         render_table, report_csv)
from .model import (D_FUSED, LAYOUT, ModelParams, Prediction, encode_semantic,
                    encode_spectral, encode_stat, forward, forward_batch,
                    load_checkpoint, save_checkpoint, score_patches, spatial_block)
from .preprocessing import (NORM_MEAN, NORM_STD, fft2d, fft_features, fold_patches,
                            normalize, resize_bilinear, stat_features, unfold_patches)
from .semantic import EmbeddingFile, SemanticProvider, stub, write_embeddings
from .training import (AdamW, InMemoryViews, StageResult, TrainConfig,
                       bce_with_logits, fit, progressive_finetune, train_epoch)

__version__ = "0.1.0"
