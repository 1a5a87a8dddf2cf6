"""Minimal deterministic neural-network kernel (float64, numpy).

Dense layers, embedding tables, an LSTM cell, MSE loss, Adam with a
square-root learning-rate decay, finite-difference gradient verification,
and a bit-exact parameter container. Forward passes are pure; training
mutates parameters in place and must be externally serialized.
"""

from .layers import (
    DenseLayer,
    EmbeddingTable,
    LstmCell,
    dense_forward,
    init_dense,
    init_embedding,
    init_lstm,
    lstm_step,
    param_rng,
)
from .optim import AdamState, TrainConfig, adam_step, lr_at, mse_loss
from .gradcheck import grad_check
from .params import load_params, save_params

__all__ = [
    "AdamState",
    "DenseLayer",
    "EmbeddingTable",
    "LstmCell",
    "TrainConfig",
    "adam_step",
    "dense_forward",
    "grad_check",
    "init_dense",
    "init_embedding",
    "init_lstm",
    "load_params",
    "lr_at",
    "lstm_step",
    "mse_loss",
    "param_rng",
    "save_params",
]
