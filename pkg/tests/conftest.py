import numpy as np
import pytest


class TapeRng:
    """Replays a recorded tape of draws, for hand-computed update checks.

    Mimics the Generator methods the trainers use; draws are consumed in
    row-major order like the real thing.
    """

    def __init__(self, uniforms=(), normals=()):
        self.uniforms = list(uniforms)
        self.normals = list(normals)

    def _take(self, tape, shape):
        n = int(np.prod(shape))
        if len(tape) < n:
            raise AssertionError(f"tape exhausted: wanted {n}, have {len(tape)}")
        out = np.array(tape[:n], dtype=np.float64).reshape(shape)
        del tape[:n]
        return out

    def random(self, shape):
        return self._take(self.uniforms, shape)

    def standard_normal(self, shape):
        return self._take(self.normals, shape)

    def permutation(self, n):
        return np.arange(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
