import numpy as np

from forgetmari.rng import stream


class TestStream:
    def test_same_seed_and_name_repeat(self):
        a = stream(7, "finetune", "shuffle").random(5)
        b = stream(7, "finetune", "shuffle").random(5)
        assert np.array_equal(a, b)

    def test_names_separate_streams(self):
        a = stream(7, "finetune").random(5)
        b = stream(7, "unlearn").random(5)
        assert not np.array_equal(a, b)

    def test_seeds_separate_streams(self):
        assert not np.array_equal(stream(1, "x").random(5), stream(2, "x").random(5))

    def test_name_path_is_ordered(self):
        a = stream(0, "a", "b").random(3)
        b = stream(0, "b", "a").random(3)
        assert not np.array_equal(a, b)

    def test_unnamed_stream(self):
        assert stream(3).integers(0, 10, size=4).shape == (4,)
