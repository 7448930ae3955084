"""Test the counter-based random streams."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.models.schemas import Namespace, RngStreamSpec
from src.utils.rng import NAMESPACE_STRIDE, StreamFactory, open_stream, stream_word


def _draws(generator, n=8):
    return generator.random(n)


class TestStreams:

    def test_same_spec_same_stream(self):
        spec = RngStreamSpec(master_seed=42, namespace=Namespace.TRAJECTORY, index=3)
        np.testing.assert_array_equal(_draws(open_stream(spec)), _draws(open_stream(spec)))

    def test_indices_are_independent(self):
        factory = StreamFactory(42)
        first = _draws(factory.generator(Namespace.TRAJECTORY, 0))
        second = _draws(factory.generator(Namespace.TRAJECTORY, 1))
        assert not np.array_equal(first, second)

    def test_namespaces_are_independent(self):
        factory = StreamFactory(42)
        streams = factory.trajectory_streams(5)
        noise = factory.calorimeter_stream(5)
        draws = [_draws(streams.jump), _draws(streams.direction), _draws(noise)]
        assert not np.array_equal(draws[0], draws[1])
        assert not np.array_equal(draws[0], draws[2])

    def test_master_seed_changes_streams(self):
        a = _draws(StreamFactory(1).calorimeter_stream(0))
        b = _draws(StreamFactory(2).calorimeter_stream(0))
        assert not np.array_equal(a, b)

    def test_consumption_order_does_not_matter(self):
        """Opening stream 7 after draining stream 3 gives the same values as opening it first."""
        factory = StreamFactory(9)
        direct = _draws(factory.trajectory_streams(7).jump)
        factory.trajectory_streams(3).jump.random(10_000)
        assert np.array_equal(direct, _draws(factory.trajectory_streams(7).jump))

    def test_trajectory_streams_carry_identity(self):
        streams = StreamFactory(123).trajectory_streams(4)
        assert streams.seed == 123
        assert streams.index == 4

    def test_largest_seed_accepted(self):
        _draws(StreamFactory(2**64 - 1).trajectory_streams(0).jump)

    def test_seed_out_of_range(self):
        with pytest.raises(ValidationError):
            RngStreamSpec(master_seed=2**64, namespace=Namespace.TRAJECTORY, index=0)

    def test_stream_word_layout(self):
        spec = RngStreamSpec(master_seed=0, namespace=Namespace.CALORIMETER_NOISE, index=11)
        assert stream_word(spec) == 2 * NAMESPACE_STRIDE + 11

    def test_index_beyond_stride_rejected(self):
        spec = RngStreamSpec(master_seed=0, namespace=Namespace.TRAJECTORY, index=NAMESPACE_STRIDE)
        with pytest.raises(ValueError):
            stream_word(spec)
