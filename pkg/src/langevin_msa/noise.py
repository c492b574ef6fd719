"""Counter-based Gaussian noise addressed by (seed, replica, step).

Replicas are grouped into fixed blocks of ``BLOCK_SIZE``. The draw for block
``b`` at step ``k`` comes from a Philox generator keyed by the seed (and a
stream id) with its counter positioned at ``(k, b)``, so any vector can be
regenerated without replaying earlier draws, and the result never depends on
which worker produced it or in what order.
"""

from __future__ import annotations

import numpy as np

from ._validation import check_int

BLOCK_SIZE = 4096

_MASK64 = (1 << 64) - 1


class NoiseStream:
    """Deterministic source of i.i.d. standard normal vectors.

    Distinct ``stream`` ids give independent families of draws under the same
    seed (used to keep chain noise, start draws and auxiliary variables apart).
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = check_int(seed, "seed", minimum=0) & _MASK64
        self.stream = check_int(stream, "stream", minimum=0) & _MASK64
        self._key = self.seed | (self.stream << 64)

    def generator(self, block: int, step: int) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=self._key, counter=[0, 0, int(step), int(block)])
        )

    def block(self, block: int, step: int, n: int, shape=()) -> np.ndarray:
        """Draws for the first ``n`` replicas of ``block``: array ``(n, *shape)``.

        Generation is row-major with replicas leading, so a shorter request is
        a prefix of a longer one and the row of a replica does not depend on
        how many replicas were requested.
        """
        if isinstance(shape, int):
            shape = (shape,)
        return self.generator(block, step).standard_normal((n, *shape))

    def draw(self, replica: int, step: int, shape=()) -> np.ndarray:
        """The vector addressed by ``(replica, step)``."""
        b, r = divmod(check_int(replica, "replica"), BLOCK_SIZE)
        return self.block(b, step, r + 1, shape)[r]


def replica_blocks(replicas: int):
    """``(block_index, start, stop)`` triples covering ``range(replicas)``."""
    return [
        (b, start, min(start + BLOCK_SIZE, replicas))
        for b, start in enumerate(range(0, replicas, BLOCK_SIZE))
    ]


def tree_sum(parts):
    """Pairwise sum in a fixed order; the result depends only on ``parts``."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to sum")
    while len(parts) > 1:
        merged = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def tree_moments(parts):
    """Merge per-block ``(count, mean, centred sum of squares)`` in a fixed pairwise order.

    Uses the parallel update of Chan et al., which avoids the cancellation of
    ``E[x^2] - E[x]^2`` when the spread is tiny relative to the mean.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to merge")
    while len(parts) > 1:
        merged = []
        for i in range(0, len(parts) - 1, 2):
            (na, ma, sa), (nb, mb, sb) = parts[i], parts[i + 1]
            n = na + nb
            delta = mb - ma
            merged.append((n, ma + delta * (nb / n), sa + sb + delta * delta * (na * nb / n)))
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]
