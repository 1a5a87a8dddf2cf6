"""slcrec: context-aware neural recommendation with learned latent context.

The pipeline has three stages. Interaction logs are binarized into
fixed-width context vectors and split chronologically. Unsupervised
encoders compress context — an autoencoder for single vectors, an LSTM
encoder-decoder for windows of consecutive vectors. A neural
matrix-factorization recommender then takes the compressed context
concatenated into its MLP tower and regresses ratings.
"""

from .data import (
    ContextSequence,
    ContextVector,
    Dataset,
    RawInteraction,
    binarize,
    binarize_all,
    generate_sequences,
    load_interactions,
    save_interactions,
    time_split,
)
from .encoders import (
    AutoEncoderModel,
    LatentContext,
    LstmEncDecModel,
    encode_current,
    encode_sequence,
    reconstruct,
    train_autoencoder,
    train_lstm_encdec,
)
from .evaluation import (
    CandidateSet,
    EvalReport,
    SampledCandidatePolicy,
    evaluate,
    hit_at_k,
    mae,
    rmse,
    sequence_length_sweep,
)
from .recommender import (
    ContextMode,
    ModelConfig,
    NeuMfModel,
    TrainRow,
    assemble_rows,
    build_model,
    predict,
    train,
)
from .schema import Dimension, FeatureSchema, builtin_schema, load_schema, save_schema
from .synth import SynthSpec, synth_dataset

__version__ = "0.1.0"

__all__ = [
    "AutoEncoderModel",
    "CandidateSet",
    "ContextMode",
    "ContextSequence",
    "ContextVector",
    "Dataset",
    "Dimension",
    "EvalReport",
    "FeatureSchema",
    "LatentContext",
    "LstmEncDecModel",
    "ModelConfig",
    "NeuMfModel",
    "RawInteraction",
    "SampledCandidatePolicy",
    "SynthSpec",
    "TrainRow",
    "assemble_rows",
    "binarize",
    "binarize_all",
    "build_model",
    "builtin_schema",
    "encode_current",
    "encode_sequence",
    "evaluate",
    "generate_sequences",
    "hit_at_k",
    "load_interactions",
    "load_schema",
    "mae",
    "predict",
    "reconstruct",
    "rmse",
    "save_interactions",
    "save_schema",
    "sequence_length_sweep",
    "synth_dataset",
    "time_split",
    "train",
    "train_autoencoder",
    "train_lstm_encdec",
]
