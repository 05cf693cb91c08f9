"""Analytic test curves used by the bundled scenarios.

Each generator maps an array of parameters ``s`` in ``[0, 1]`` to an ``(N, 2)``
array of points. ``GENERATORS`` is the registry the scenario loader resolves
``generator = "<name>"`` against.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def wavy_ring(s):
    """Ring of radius 8 about (4, 4) with a two-lobe ripple of amplitude 1."""
    s = np.asarray(s, dtype=float)
    x = (8 + np.sin(2 * TWO_PI * s)) * np.cos(TWO_PI * s) + 4
    y = (8 + np.cos(2 * TWO_PI * s)) * np.sin(TWO_PI * s) + 4
    return np.column_stack([x, y])


def wide_wavy_ring(s):
    """Ring of radius 8 about (-12, 4) with a two-lobe ripple of amplitude 2."""
    s = np.asarray(s, dtype=float)
    x = (8 + 2 * np.sin(2 * TWO_PI * s)) * np.cos(TWO_PI * s) - 12
    y = (8 + 2 * np.cos(2 * TWO_PI * s)) * np.sin(TWO_PI * s) + 4
    return np.column_stack([x, y])


def lopsided_ring(s):
    """Polar curve r = 8 + 2 cos(2 pi s) + sin(4 pi s) centred at (24, 4)."""
    s = np.asarray(s, dtype=float)
    r = 8 + 2 * np.cos(TWO_PI * s) + np.sin(2 * TWO_PI * s)
    return np.column_stack([r * np.cos(TWO_PI * s) + 24, r * np.sin(TWO_PI * s) + 4])


def arena_cardioid(s):
    """Small cardioid (metres) centred at (0.75, 0.675)."""
    s = np.asarray(s, dtype=float)
    r = 0.225 * (1 - np.sin(TWO_PI * s))
    return np.column_stack([r * np.cos(TWO_PI * s) + 0.75, r * np.sin(TWO_PI * s) + 0.675])


def arena_scallop(s):
    """Small five-lobed ring (metres) centred at (1.125, 0.375)."""
    s = np.asarray(s, dtype=float)
    r = 0.03 * np.sin(2 * TWO_PI * s) + 0.06 * np.cos(5 * TWO_PI * s) + 0.225
    return np.column_stack([r * np.cos(TWO_PI * s) + 1.125, r * np.sin(TWO_PI * s) + 0.375])


# control points of the bundled open-curve scenario
OPEN_CURVE_CONTROL_POINTS = np.array([[3.5, 3.0], [-0.5, -4.0], [-2.0, 6.0], [-2.0, -1.0]])

GENERATORS = {
    "wavy-ring": wavy_ring,
    "wide-wavy-ring": wide_wavy_ring,
    "lopsided-ring": lopsided_ring,
    "arena-cardioid": arena_cardioid,
    "arena-scallop": arena_scallop,
}


def get_generator(name):
    try:
        return GENERATORS[name]
    except KeyError:
        raise KeyError(f"unknown curve generator {name!r}; known: {sorted(GENERATORS)}") from None
