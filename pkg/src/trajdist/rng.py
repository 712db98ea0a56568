"""Counter-based random streams, vectorised across many independent keys.

Each trajectory owns a 64-bit seed and draws its k-th block of randomness
as ``philox4x64(counter=k, key=seed)``. Nothing depends on the order in
which trajectories are processed, so results do not change with the number
of workers or the chunking. numpy ships the same generator
(``np.random.Philox``) but only one key per object; evaluating thousands of
keys at once is what this module adds.
"""

import numpy as np

__all__ = ["philox4x64", "splitmix64", "mix_seed", "uniforms"]

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO = np.uint64(0xFFFFFFFF)
_32 = np.uint64(32)


def _mulhilo(a, b):
    """High and low 64-bit halves of the 128-bit product ``a * b``."""
    a0, a1 = a & _LO, a >> _32
    b0, b1 = b & _LO, b >> _32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    mid = (p00 >> _32) + (p01 & _LO) + (p10 & _LO)
    hi = a1 * b1 + (p01 >> _32) + (p10 >> _32) + (mid >> _32)
    return hi, a * b


def philox4x64(counter, key, rounds=10):
    """Philox-4x64 block function.

    Parameters
    ----------
    counter : array_like of uint64, shape (..., 4)
    key : array_like of uint64, shape (..., 2)

    Returns
    -------
    ndarray of uint64, shape (..., 4)
    """
    with np.errstate(over="ignore"):
        c = np.asarray(counter, dtype=np.uint64)
        k = np.asarray(key, dtype=np.uint64)
        c0, c1, c2, c3 = (c[..., i].copy() for i in range(4))
        k0, k1 = k[..., 0].copy(), k[..., 1].copy()
        for r in range(rounds):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        return np.stack([c0, c1, c2, c3], axis=-1)


def splitmix64(x):
    """SplitMix64 output function (a bijective 64-bit finaliser)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _W0
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def mix_seed(base_seed, index):
    """Seed of trajectory ``index`` under ``base_seed``.

    This is the ``index``-th output of a SplitMix64 sequence started at
    ``base_seed``, so for a fixed base the map from index to seed is
    injective.
    """
    with np.errstate(over="ignore"):
        base = np.uint64(int(base_seed) % 2**64)
        idx = np.asarray(index, dtype=np.uint64)
        return splitmix64(base + idx * _W0)


def uniforms(seeds, block):
    """Four doubles in ``[0, 1)`` per seed from counter block ``block``.

    ``block`` may be a scalar or an array broadcasting against ``seeds``.
    Uses the top 53 bits of each output word.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    block = np.broadcast_to(np.asarray(block, dtype=np.uint64), seeds.shape)
    ctr = np.zeros(seeds.shape + (4,), np.uint64)
    ctr[..., 0] = block
    key = np.zeros(seeds.shape + (2,), np.uint64)
    key[..., 0] = seeds
    raw = philox4x64(ctr, key)
    return (raw >> np.uint64(11)).astype(float) * 2.0**-53
