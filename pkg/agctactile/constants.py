"""
Define constant values used throughout the tactile pipeline.

Physical limits and protocol numbers live here so the stages agree on them:
- Working area, force budget and contact solver limits
- Stiffness defaults for healthy tissue, tumor tissue and the gel
- Dataset, training and early-stopping protocol counts
"""

from typing import Final

# Side of the square phantom working area, millimeters
WORK_AREA_MM: Final[float] = 30.0

# Height of the phantom base layer above the backplate, millimeters
BASE_LAYER_MM: Final[float] = 1.5

# Mucosal ripple amplitude bound, millimeters
RIPPLE_MM: Final[float] = 0.15

# Heights are clipped to this range above the backplate, millimeters
MAX_HEIGHT_MM: Final[float] = 12.0

# Contact stiffness, N/mm per mm^2 of cell area
K_HEALTHY: Final[float] = 0.02
K_TUMOR: Final[float] = 0.20
K_GEL: Final[float] = 0.05

# The arm's force sensor keeps every interaction under this threshold, Newtons
MAX_FORCE_N: Final[float] = 3.0

# Bisection accepts a force in [FORCE_BAND_LOW * target, target]
FORCE_BAND_LOW: Final[float] = 0.98
BISECTION_MAX_ITERATIONS: Final[int] = 60
TRAVEL_LIMIT_MM: Final[float] = 15.0

# Tilt of the phantom away from the gel normal that settle_contact accepts
MAX_CONTACT_TILT_DEG: Final[float] = 30.0

# Tolerance used to validate rotation matrices and unit quaternions
ORTHONORMAL_TOLERANCE: Final[float] = 1e-9

# Allowed disagreement between two routes through a frame graph, millimeters and matrix entries
FRAME_CONSISTENCY_TOLERANCE: Final[float] = 1e-6

# Minimum z in the camera frame for a point to be projectable, millimeters
MIN_DEPTH_MM: Final[float] = 1e-6

# Relative motions below this rotation angle carry little rotation information, radians
WEAK_MOTION_ANGLE: Final[float] = 1e-3

# Rotation axes closer than this are treated as parallel, radians
PARALLEL_AXIS_ANGLE: Final[float] = 1e-2

# Quaternion scalar parts below this (motions within a few degrees of a half turn) have an
# unreliable sign; those pairs are left out of the initial rotation estimate
HALF_TURN_SCALAR: Final[float] = 0.05

NUM_CLASSES: Final[int] = 4
PHANTOMS_PER_CLASS: Final[int] = 11
VIEWS_PER_PHANTOM: Final[int] = 50

# Improvement threshold shared by early stopping, plateau scheduling and search tie-breaks
IMPROVEMENT_EPSILON: Final[float] = 1e-6

MAX_EPOCHS: Final[int] = 50
EARLY_STOP_PATIENCE: Final[int] = 10

BATCH_NORM_EPSILON: Final[float] = 1e-5
BATCH_NORM_MOMENTUM: Final[float] = 0.1

# Hyperparameter search space bounds
LR_MIN: Final[float] = 0.001
LR_MAX: Final[float] = 0.1
WEIGHT_DECAY_MAX: Final[float] = 0.1

# Configs whose train/val accuracy gap exceeds this are filtered during selection
OVERFIT_GAP: Final[float] = 0.15

# File names shared between stages
MANIFEST_FILE: Final[str] = "manifest.json"
RESOLVED_CONFIG_FILE: Final[str] = "resolved_config.json"
REGISTRATION_FILE: Final[str] = "registration.json"
SEARCH_FILE: Final[str] = "search.json"
RESULTS_TABLE_FILE: Final[str] = "results_table.csv"
KFOLD_CURVES_FILE: Final[str] = "kfold_curves.csv"
REPORT_FILE: Final[str] = "report.json"
KFOLD_FILE: Final[str] = "kfold.json"
SWEEP_PLOT_FILE: Final[str] = "search_sweep.svg"
CHECKPOINT_FILE: Final[str] = "model.ckpt"
RUN_RECORD_FILE: Final[str] = "run.json"
CONFUSION_PLOT_STEM: Final[str] = "confusion_matrix"
COMPARISON_FILE: Final[str] = "comparison.csv"
SUMMARY_FILE: Final[str] = "summary.json"
BASELINE_RESOURCE: Final[str] = "baseline.json"
