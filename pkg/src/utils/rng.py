"""Counter-based random streams derived from (master seed, namespace, index).

Every stream is a Philox generator whose 128-bit key is hashed by
``numpy.random.SeedSequence`` from the master seed and a single spawn word
``NAMESPACE_STRIDE * namespace_code + index``. Streams never share state, so
results do not depend on the order in which workers consume them.
"""

from typing import NamedTuple

import numpy as np

from ..models.schemas import Namespace, RngStreamSpec

NAMESPACE_STRIDE = 1 << 40

NAMESPACE_CODES = {
    Namespace.TRAJECTORY: 0,
    Namespace.DIRECTION: 1,
    Namespace.CALORIMETER_NOISE: 2,
}


def stream_word(spec: RngStreamSpec) -> int:
    """Spawn word for a stream: the namespace offset plus the stream index."""
    if spec.index >= NAMESPACE_STRIDE:
        raise ValueError(f"stream index {spec.index} exceeds namespace stride")
    return NAMESPACE_STRIDE * NAMESPACE_CODES[spec.namespace] + spec.index


def open_stream(spec: RngStreamSpec) -> np.random.Generator:
    """
    Open the generator identified by a stream spec.

    Args:
        spec: Master seed, namespace and stream index

    Returns:
        A fresh numpy Generator positioned at the start of the stream
    """
    seed_sequence = np.random.SeedSequence(entropy=spec.master_seed, spawn_key=(stream_word(spec),))
    return np.random.Generator(np.random.Philox(seed_sequence))


class TrajectoryStreams(NamedTuple):
    """The two streams consumed by one trajectory."""
    seed: int
    index: int
    jump: np.random.Generator
    direction: np.random.Generator


class StreamFactory:
    """Hands out reproducible streams for a master seed."""

    def __init__(self, master_seed: int):
        self.master_seed = master_seed

    def generator(self, namespace: Namespace, index: int) -> np.random.Generator:
        return open_stream(RngStreamSpec(master_seed=self.master_seed, namespace=namespace, index=index))

    def trajectory_streams(self, index: int) -> TrajectoryStreams:
        """Jump-decision and jump-direction streams of trajectory ``index``."""
        return TrajectoryStreams(
            seed=self.master_seed,
            index=index,
            jump=self.generator(Namespace.TRAJECTORY, index),
            direction=self.generator(Namespace.DIRECTION, index),
        )

    def calorimeter_stream(self, index: int) -> np.random.Generator:
        """Noise stream of the detection trace belonging to trajectory ``index``."""
        return self.generator(Namespace.CALORIMETER_NOISE, index)
