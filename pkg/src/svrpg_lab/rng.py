"""Counter-based random streams.

Every random draw in the library comes from a stream addressed by a path of
integers rooted at the experiment seed, e.g. ``(seed, TRAIN, batch, index)``.
A stream's output depends only on its path, never on which other streams were
consumed before it or on which worker consumed them, so parallel sampling
reproduces sequential sampling bit for bit.
"""

from __future__ import annotations

import numpy as np

# Top-level stream namespaces.
INIT = 0
TRAIN = 1
EVAL = 2
SELECT = 3
ORACLE = 4
DIAG = 5
STATS = 6


class Streams:
    """A node in the tree of random streams."""

    __slots__ = ("seed", "path")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)

    def child(self, *keys: int) -> "Streams":
        return Streams(self.seed, self.path + tuple(keys))

    def key(self) -> int:
        """64-bit key identifying this node."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return int(ss.generate_state(1, np.uint64)[0])

    def generator(self) -> np.random.Generator:
        """A generator owned by this node alone."""
        return np.random.Generator(np.random.Philox(key=[self.key(), 0]))

    def trajectory_generators(self, n: int) -> list[np.random.Generator]:
        """Generators for trajectory indices ``0..n-1`` below this node.

        Index ``i`` maps to the same generator as ``self.child(i)`` would
        under :meth:`indexed`, independently of ``n``.
        """
        base = self.key()
        return [np.random.Generator(np.random.Philox(key=[base, i + 1])) for i in range(n)]

    def indexed(self, i: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.key(), i + 1]))

    def __repr__(self) -> str:
        return f"Streams(seed={self.seed}, path={self.path})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Streams) and (self.seed, self.path) == (other.seed, other.path)

    def __hash__(self) -> int:
        return hash((self.seed, self.path))


def as_streams(rng: "Streams | int") -> Streams:
    return rng if isinstance(rng, Streams) else Streams(int(rng))
