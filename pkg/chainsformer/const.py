"""Constants for ChainsFormer."""
from __future__ import annotations

import logging
from typing import Final

DOMAIN: Final = "chainsformer"

LOGGER = logging.getLogger(__package__)

CONF_EPOCHS = "epochs"
CONF_LEARNING_RATE = "learning_rate"
CONF_WALKS = "walks"
CONF_TOP_K = "top_k"
CONF_MAX_HOPS = "max_hops"
CONF_ENCODER_DIM = "encoder_dim"
CONF_FILTER_DIM = "filter_dim"
CONF_LAYERS = "layers"
CONF_HEADS = "heads"
CONF_AFFINE_HIDDEN = "affine_hidden"
CONF_LAMBDA = "lambda"
CONF_CURVATURE = "curvature"
CONF_PROJECTION = "projection"
CONF_LOSS = "loss"
CONF_BATCH_SIZE = "batch_size"
CONF_SEED = "seed"
CONF_EPSILON = "convergence_threshold"
CONF_PATIENCE = "patience"
CONF_GRAD_CLIP = "grad_clip"
CONF_CACHE_TOC = "cache_toc"
CONF_SCORE_ORIENTATION = "score_orientation"
CONF_FILTER_SPACE = "filter_space"
CONF_CHAIN_ENCODER = "chain_encoder"
CONF_VALUE_ENCODING = "value_encoding"
CONF_NUMERICAL_AWARE = "numerical_aware"
CONF_CHAIN_WEIGHTING = "chain_weighting"
CONF_SAME_ATTRIBUTE_ONLY = "same_attribute_only"

CONF_RELATIONAL_PATH = "relational_path"
CONF_TRAIN_PATH = "train_path"
CONF_VALID_PATH = "valid_path"
CONF_TEST_PATH = "test_path"
CONF_OUT = "out"
CONF_LOGGER = "logger"

PROJECTIONS: Final = ("direct", "translation", "scaling", "combined")
LOSSES: Final = ("l1", "l2")
SCORE_ORIENTATIONS: Final = ("smallest", "largest")
FILTER_SPACES: Final = ("hyperbolic", "euclidean", "random")
CHAIN_ENCODERS: Final = ("transformer", "mean", "lstm")
VALUE_ENCODINGS: Final = ("float64", "log")

DEFAULT_EPOCHS = 200
DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_WALKS = 2048
DEFAULT_TOP_K = 256
DEFAULT_MAX_HOPS = 3
DEFAULT_ENCODER_DIM = 256
DEFAULT_FILTER_DIM = 128
DEFAULT_LAYERS = 2
DEFAULT_HEADS = 4
DEFAULT_AFFINE_HIDDEN = 256
DEFAULT_LAMBDA = 0.5
DEFAULT_CURVATURE = 1.0
DEFAULT_PROJECTION = "scaling"
DEFAULT_LOSS = "l2"
DEFAULT_BATCH_SIZE = 32
DEFAULT_SEED = 0
DEFAULT_EPSILON = 1e-6
DEFAULT_PATIENCE = 10
DEFAULT_GRAD_CLIP = 1.0

BALL_MARGIN: Final = 1e-5
VALUE_BITS: Final = 64
INVERSE_SUFFIX: Final = "_inv"
CHECKPOINT_VERSION: Final = 2

CHECKPOINT_FILE = "checkpoint.npz"
BEST_CHECKPOINT_FILE = "best.npz"
EPOCH_LOG_FILE = "epochs.csv"
STATS_FILE = "attribute_stats.tsv"
CONFIG_FILE = "configuration.yaml"
