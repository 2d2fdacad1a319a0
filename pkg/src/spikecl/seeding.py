"""Named deterministic random streams.

Every stochastic choice in the package (weight init, feedback init, input
encoding, label encoding, shuffling, evaluation noise, synthetic data) draws
from its own stream, keyed by a stream id plus integer coordinates such as
(task, epoch, position). Streams are derived with ``numpy.random.SeedSequence``
spawn keys, so any sample's noise can be regenerated in isolation: runs are
reproducible, evaluation noise is independent of training progress, and a
resumed run consumes exactly the same randomness as an uninterrupted one.
"""

import numpy as np

# Stream ids. Values are part of the checkpoint compatibility contract:
# changing them changes every derived random draw.
WEIGHTS = 0
FEEDBACK = 1
INPUT_ENCODING = 2
LABEL_ENCODING = 3
SHUFFLE = 4
EVAL_ENCODING = 5
SYNTH_DATA = 6
SUBSET = 7


def stream_seed(master_seed: int, stream: int, *key: int) -> np.random.SeedSequence:
    """Seed sequence for stream `stream` at integer coordinates `key`."""
    return np.random.SeedSequence(master_seed, spawn_key=(stream, *key))


def stream_rng(master_seed: int, stream: int, *key: int) -> np.random.Generator:
    """Fresh Generator for the given stream and coordinates."""
    return np.random.default_rng(stream_seed(master_seed, stream, *key))
