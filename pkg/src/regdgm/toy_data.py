"""2-D toy distributions with mode labels.

The limited training subset is the first ``limited_m`` points of a full
population generated from ``seed``, so a given (family, seed) always yields
the same split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput

FAMILIES = ("ring8", "two_moons", "gaussian_grid")


def _ring8(n, rng, radius=2.0, std=0.05):
    labels = rng.integers(0, 8, size=n)
    theta = 2 * math.pi * labels / 8
    centers = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return centers + std * rng.standard_normal((n, 2)), labels


def _two_moons(n, rng, noise=0.05):
    labels = rng.integers(0, 2, size=n)
    t = math.pi * rng.uniform(size=n)
    upper = np.stack([np.cos(t), np.sin(t)], axis=1)
    lower = np.stack([1.0 - np.cos(t), 0.5 - np.sin(t)], axis=1)
    x = np.where(labels[:, None] == 0, upper, lower) - np.array([0.5, 0.25])
    return 1.5 * x + noise * rng.standard_normal((n, 2)), labels


def _gaussian_grid(n, rng, std=0.05):
    labels = rng.integers(0, 25, size=n)
    centers = np.stack([labels // 5 - 2.0, labels % 5 - 2.0], axis=1)
    return centers + std * rng.standard_normal((n, 2)), labels


_SAMPLERS = {"ring8": _ring8, "two_moons": _two_moons, "gaussian_grid": _gaussian_grid}
N_CLASSES = {"ring8": 8, "two_moons": 2, "gaussian_grid": 25}


def normalize_family(name: str) -> str:
    key = name.lower().replace("-", "_")
    aliases = {"ring": "ring8", "twomoons": "two_moons", "moons": "two_moons", "grid": "gaussian_grid",
               "gaussiangrid": "gaussian_grid"}
    key = aliases.get(key, key)
    if key not in FAMILIES:
        raise InvalidInput(f"unknown toy family {name!r}; expected one of {FAMILIES}")
    return key


def sample_family(family: str, n: int, rng: np.random.Generator):
    """Draw ``n`` labelled points from a toy family."""
    return _SAMPLERS[normalize_family(family)](n, rng)


def sample_auxiliary(family: str, n: int, rng: np.random.Generator, scale=1.1, rotation=math.pi / 24,
                     extra_noise=0.1):
    """A related but shifted distribution: scaled, rotated and noisier.

    Stands in for the large, related dataset a feature extractor is
    pre-trained on.
    """
    x, y = sample_family(family, n, rng)
    c, s = math.cos(rotation), math.sin(rotation)
    R = np.array([[c, -s], [s, c]])
    x = scale * x @ R.T + extra_noise * rng.standard_normal(x.shape)
    return x, y


@dataclass
class ToyDataset:
    family: str = "ring8"
    full_size: int = 2000
    limited_m: int = 64
    seed: int = 0
    full: np.ndarray = field(init=False, repr=False)
    labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.family = normalize_family(self.family)
        if self.limited_m < 1 or self.limited_m > self.full_size:
            raise InvalidInput(f"need 1 <= limited_m <= full_size, got {self.limited_m}, {self.full_size}")
        rng = np.random.default_rng(np.random.SeedSequence([int(self.seed), 0x70F]))
        self.full, self.labels = sample_family(self.family, self.full_size, rng)

    @property
    def limited(self) -> np.ndarray:
        return self.full[: self.limited_m]

    @property
    def n_classes(self) -> int:
        return N_CLASSES[self.family]
