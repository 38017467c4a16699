"""Reconstruction-based anomaly scoring for grayscale image patches."""
from .edges import CannyParams, canny, edge_count
from .evaluation import ScoreRecord, auc_pairwise, histogram, roc_curve, summarize
from .imagecore import load_pgm, minmax_normalize, quantize, save_pgm, to_float
from .inversion import (ProjectionConfig, ProjectionResult, ToyGenerator, ToyGeneratorParams,
                        mse_distance, project, pyramid_distance)
from .metrics import (ScoreBundle, default_feature_extractor, score_all, score_baseline,
                      score_canny, score_f_anogan, score_feature, score_mse, score_origin,
                      score_pg_anogan, score_psnr, score_residual)
from .synthdata import SynthConfig, gen_dataset, gen_patch

__version__ = "0.1.0"
