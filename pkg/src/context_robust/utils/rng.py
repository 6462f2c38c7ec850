"""
Seeded random streams and the sampling algorithms fixed project-wide.

Every draw is built from uniform doubles of a PCG64 bit generator:
inverse-CDF for categorical, uniform and Bernoulli draws, Box-Muller for
normals, exp of a normal for lognormals. Streams are derived from
(seed, key, key, ...) so parallel workers reproduce serial results.
"""
import math
import zlib
from typing import Union

import numpy as np

from ..exceptions import DataError

SAMPLERS = {
    "bit_generator": "PCG64",
    "seeding": "numpy.random.SeedSequence([seed, *stream_keys])",
    "categorical": "inverse-CDF",
    "uniform": "inverse-CDF",
    "bernoulli": "inverse-CDF",
    "normal": "Box-Muller",
    "lognormal": "exp(Box-Muller normal)",
}

# stable integer tags for named stream purposes
PURPOSES = {
    "data": 1,
    "train": 2,
    "eval": 3,
    "min-fit": 4,
    "min-eval": 5,
    "coverage": 6,
}


def _key(key: Union[int, str]) -> int:
    if isinstance(key, str):
        return PURPOSES.get(key, zlib.crc32(key.encode("utf-8")) + 1000)
    key = int(key)
    if key < 0:
        raise DataError(f"stream keys must be non-negative, got {key}")
    return key


def stream(seed: int, *keys: Union[int, str]) -> np.random.Generator:
    """Independent generator for (seed, *keys)"""
    if int(seed) < 0:
        raise DataError(f"seed must be non-negative, got {seed}")
    entropy = [int(seed)] + [_key(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def uniform(rng: np.random.Generator, size: int, low=0.0, high=1.0) -> np.ndarray:
    return low + (high - low) * rng.random(size)


def categorical(rng: np.random.Generator, probs, size: int) -> np.ndarray:
    """0-based category indices"""
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right")


def bernoulli(rng: np.random.Generator, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return (rng.random(p.shape) < p).astype(float)


def normal(rng: np.random.Generator, size: int, mean=0.0, sd=1.0) -> np.ndarray:
    half = math.ceil(size / 2)
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([radius * np.cos(2.0 * np.pi * u2), radius * np.sin(2.0 * np.pi * u2)])[:size]
    return mean + sd * z


def lognormal(rng: np.random.Generator, size: int, log_mean=0.0, log_sd=1.0) -> np.ndarray:
    return np.exp(normal(rng, size, log_mean, log_sd))
