import math
import os

# Reserved vocabulary symbols; their ids are fixed.
PAD_SYMBOL = "<pad>"
BOS_SYMBOL = "<bos>"
PAD_ID = 0
BOS_ID = 1
MAX_VOCAB_SIZE = 512
VOCAB_LEVELS = ["char", "word"]

# Model defaults
DEFAULT_CONTEXT_LEN = 4
DEFAULT_EMBED_DIM = 16
DEFAULT_HIDDEN_DIM = 64
DEFAULT_SEQ_LEN = 32
INIT_SCALE = 0.08
DEFAULT_CLIP_NORM = 5.0

# Optimizers
OPTIMIZERS = ["sgd", "adam"]
ADAM_BETA1 = 0.85
ADAM_BETA2 = 0.99
ADAM_EPS = 1e-8

# Checkpoint file layout: magic, u64 header length, JSON header, <f8 params
CHECKPOINT_MAGIC = b"MARICKPT"

LN2 = math.log(2.0)

# Tolerances
PROB_SUM_TOL = 1e-9
BOUNDARY_CLAMP = 1e-12
EXACT_TOL = 1e-9

# binary_entropy_inv bisection controls
BISECT_MAXITER = 200
BISECT_XTOL = 1e-12

# Objectives, estimators and policies
METHODS = ["mari", "ga", "gd", "klga", "none"]
UNLEARN_METHODS = ["mari", "ga", "gd", "klga"]
MARI_MODES = ["token_wise", "pooled"]
ALPHA_POLICIES = ["batch", "global"]
STOP_POLICIES = ["val_drop", "detector", "none"]
SOURCE_TAGS = ["retain", "unlearn", "union"]
# methods whose objective depends on λ
SWEEP_METHODS = ["mari", "gd", "klga"]

# Detectors
DETECTORS = ["min_k", "perplexity"]
DEFAULT_K_FRACTION = 0.2
ORIENTATIONS = ["nonmember_positive", "member_positive"]
# Orientation under which a low AUC reads "the model was trained on the members"
DETECTOR_ORIENTATION = {
    "min_k": "nonmember_positive",
    "perplexity": "member_positive",
}

# Split modes
SPLIT_MODES = ["alternating", "ratio"]

# Metric files
TRACE_COLUMNS = [
    "epoch",
    "loss_total",
    "loss_utility",
    "loss_unlearn",
    "acc_unlearn",
    "acc_retain",
    "acc_validation",
]
CURVE_COLUMNS = ["phase"] + TRACE_COLUMNS
BAR_COLUMNS = ["model", "acc_unlearn", "acc_retain", "acc_validation", "auc"]
SWEEP_COLUMNS = [
    "method",
    "lambda",
    "acc_unlearn",
    "acc_retain",
    "acc_validation",
    "auc",
    "epochs_run",
]

# Internal schema paths
SCHEMA_FILEPATH = os.path.join(os.path.dirname(__file__), "schemas")
EXPERIMENT_SCHEMA_PATH = os.path.join(SCHEMA_FILEPATH, "experiment.yaml")

# Artifacts written by run_experiment
BASELINE_CKPT = "baseline.ckpt"
GOLD_CKPT = "gold.ckpt"
UNLEARNED_CKPT = "unlearned.ckpt"
SUMMARY_FILE = "summary.json"
BOUNDS_FILE = "bounds.jsonl"
SWEEP_FILE = "sweep.csv"
PARTIAL_SUFFIX = ".partial"
