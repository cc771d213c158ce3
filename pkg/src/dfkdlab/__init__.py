"""Desk-scale data-free knowledge distillation lab.

Trains a compact student from a frozen teacher without the teacher's
original training data: unlabeled pool samples are admitted through an
adaptive confidence threshold, teacher predictions are denoised by
dropping low-confidence classes, and the student learns from a softened
KL term plus explicit feature matching and an implicit batch-relation
term. Ships its own float64 autodiff engine with a compiled kernel core
and a NumPy fallback.
"""

from .tensor import (
    DegenerateDistributionError,
    InfiniteDivergenceError,
    ShapeError,
    Tape,
    Tensor,
    TapeReusedError,
    backward,
    huber,
    kl_divergence,
    l1_distance,
    matmul,
    mean_pairwise_distance,
    softmax,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
