"""Respiratory sound classification with semi-supervised training.

Pipeline: WAV decoding and resampling -> MFCC feature matrices -> a small
convolutional classifier trained from scratch, optionally with mixmatch,
co-refinement and co-refurbishing passes over an unlabeled pool -> per-class
classification reports.
"""

from .audio_io import WORKING_RATE, AudioClip, load_wav, resample
from .dataset import (CLASS_IDS, CLASS_NAMES, FeatureCache, RecordingMeta, SplitManifest,
                      build_feature_cache, load_diagnoses, make_splits, parse_filename,
                      scan_audio_dir)
from .evaluation import ClassificationReport, confusion, format_report, report
from .features import MfccConfig, extract_mfcc
from .nn import (AdamState, CnnSpec, ModelParams, adam_step, forward, forward_batch,
                 gradient_check, init_params, load_checkpoint, loss_and_backward,
                 save_checkpoint)
from .ssl import (MixedBatch, SslConfig, augment, co_refinement_step, co_refurbishing_step,
                  guess_label, mixmatch, mixmatch_loss, mixup, sharpen)
from .training import (FeatureNormalizer, RunManifest, TrainConfig, ablate,
                       evaluate_split, train_baseline, train_semi)

__version__ = "0.1.0"
