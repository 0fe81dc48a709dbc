"""Named random substreams derived from a single experiment seed.

Every stage that draws randomness (splitting, weight init, dropout, feature
augmentation, mixup pairing, ...) gets its own stream, optionally refined by
integer context such as (epoch, pass, batch). Streams are independent, so one
stage consuming more or fewer draws never perturbs another stage.
"""

import numpy as np

_STREAMS = {
    "split": 1,
    "init": 2,
    "dropout": 3,
    "augment": 4,
    "mixup": 5,
    "batch": 6,
    "unlabeled": 7,
    "val": 8,
    "refurbish": 9,
    "synth": 10,
}


def substream(seed: int, name: str, *context: int) -> np.random.Generator:
    """Generator for stream `name` under `seed`, refined by integer context."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    key = (_STREAMS[name],) + tuple(int(c) for c in context)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
