"""Spiking neural networks that learn task streams without forgetting.

Event-driven supervised learning with three synapse-local protection
mechanisms: a metaplastic state that slows further change of heavily used
weights, slow consolidation into reference weights, and heterosynaptic decay
toward them. Includes the Poisson data pipeline, the split-task benchmark
harness, continual-learning metrics, and a CLI (`spikecl`).
"""

from .backend import active_backend, available_backends, set_backend
from .datasets import Dataset, TaskSequence, build_split_tasks, load_idx, make_synthetic_digits
from .encoding import SpikeEncoderConfig, encode_label_sample, encode_sample
from .errors import ConfigError, DataError, SpikeclError
from .metrics import (AccuracyMatrix, backward_transfer, forward_transfer, mean_accuracy,
                      memory_overhead, representation_similarity)
from .network import (NetworkConfig, NetworkModel, build_network, end_of_sample,
                      load_checkpoint, predict, run_sample, save_checkpoint, step)
from .neurons import ErrorNeuronParams, NeuronParams
from .plasticity import PlasticityParams, SynapseState

__version__ = "0.1.0"

__all__ = [
    "AccuracyMatrix", "ConfigError", "DataError", "Dataset", "ErrorNeuronParams",
    "NetworkConfig", "NetworkModel", "NeuronParams", "PlasticityParams",
    "SpikeEncoderConfig", "SpikeclError", "SynapseState", "TaskSequence",
    "active_backend", "available_backends", "backward_transfer", "build_network",
    "build_split_tasks", "encode_label_sample", "encode_sample", "end_of_sample",
    "forward_transfer", "load_checkpoint", "load_idx", "make_synthetic_digits",
    "mean_accuracy", "memory_overhead", "predict", "representation_similarity",
    "run_sample", "save_checkpoint", "set_backend", "step", "__version__",
]
