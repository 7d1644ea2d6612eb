import numpy as np

from pion.rng import Rng


def skew(rng: Rng, n: int) -> np.ndarray:
    a = rng.normal_matrix(n, n)
    return 0.5 * (a - a.T)


def scaled_skew(rng: Rng, n: int, fro: float) -> np.ndarray:
    s = skew(rng, n)
    return s * (fro / np.sqrt(np.sum(s * s)))
