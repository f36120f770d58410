import numpy as np


def mse(a, b):
    """Mean squared difference of two equally shaped grids."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"grid shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty grids")
    return float(np.mean((a - b) ** 2))
