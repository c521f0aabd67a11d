"""layoutgen: learn a generative model of graph layouts and explore its 2D latent space."""

from .engines import Layout, LayoutParams, TrainingCorpus, generate_corpus
from .features import gaussian_kernel_feature, layout_feature, pairwise_distances
from .graphs import Graph, SENPartition, largest_component, load_graph, structural_equivalence
from .model import ModelConfig, ModelParams, decode, encode, load_model, save_model
from .training import TrainConfig, cross_validate, train, train_streaming

__version__ = "0.1.0"

__all__ = [
    "Graph", "SENPartition", "Layout", "LayoutParams", "TrainingCorpus",
    "ModelConfig", "ModelParams", "TrainConfig",
    "load_graph", "largest_component", "structural_equivalence",
    "pairwise_distances", "layout_feature", "gaussian_kernel_feature",
    "generate_corpus", "encode", "decode", "save_model", "load_model",
    "train", "train_streaming", "cross_validate",
]
