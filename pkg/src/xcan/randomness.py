"""Reproducible random number generation.

Every stochastic routine in this package draws its normals from
:class:`NormalStream`: a Box-Muller transform layered on top of the Philox
counter-based 64-bit generator. Philox guarantees a stable uniform stream
for a given seed across numpy versions and platforms, and Box-Muller is a
fixed, documented mapping from uniforms to normals:

    u1 = 1 - v1            (v1, v2 consecutive uniforms in [0, 1))
    r  = sqrt(-2 ln u1)
    z0 = r cos(2 pi v2)
    z1 = r sin(2 pi v2)

For a request of n normals, ceil(n / 2) (v1, v2) pairs are consumed and the
z0 block is emitted before the z1 block.

Independent sub-streams (e.g. one per simulated block) are derived with
``numpy.random.SeedSequence.spawn``, so the overall layout is reproducible
from a single 64-bit seed.
"""

from __future__ import annotations

import numpy as np

_TWO_PI = 2.0 * np.pi


class NormalStream:
    """Seedable source of standard-normal and uniform variates.

    Parameters
    ----------
    seed : int or numpy.random.SeedSequence
        Root seed. Passing a spawned ``SeedSequence`` yields an independent
        child stream.
    """

    def __init__(self, seed):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed))
        self._gen = np.random.Generator(np.random.Philox(self._seq))

    def spawn(self, n: int) -> list["NormalStream"]:
        """Derive ``n`` independent child streams."""
        return [NormalStream(child) for child in self._seq.spawn(n)]

    def uniform(self, size=None) -> np.ndarray:
        """Uniform variates in [0, 1) straight from the Philox stream."""
        return self._gen.random(size)

    def normal(self, size=None) -> np.ndarray:
        """Standard-normal variates via the Box-Muller transform."""
        if size is None:
            return self.normal(1)[0]
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        half = (n + 1) // 2
        v1 = self._gen.random(half)
        v2 = self._gen.random(half)
        r = np.sqrt(-2.0 * np.log1p(-v1))
        z = np.concatenate([r * np.cos(_TWO_PI * v2), r * np.sin(_TWO_PI * v2)])
        return z[:n].reshape(shape)
