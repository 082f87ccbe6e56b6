"""Parameter-free sinusoidal position encoding."""

from __future__ import annotations

import numpy as np

FREQ_BASE = 10000.0


def pe_width(n_coords: int, d_model: int) -> int:
    """Largest encoding width <= d_model usable for ``n_coords`` coordinates."""
    width = d_model - d_model % (2 * n_coords)
    if width < 2 * n_coords:
        raise ValueError(
            f"model width {d_model} too small to encode {n_coords} coordinates"
        )
    return width


def sinusoidal_pe(positions: np.ndarray, d_out: int) -> np.ndarray:
    """Encode (..., P) coordinates as (..., d_out) interleaved sin/cos.

    Each coordinate gets d_out/P channels at geometrically spaced frequencies
    (base 10000): channel 2i is sin(pos * w_i), channel 2i+1 is cos(pos * w_i).
    Deterministic, bounded in [-1, 1].
    """
    positions = np.asarray(positions, dtype=np.float64)
    p = positions.shape[-1]
    if d_out % 2 != 0 or d_out % (2 * p) != 0:
        raise ValueError(
            f"encoding width {d_out} must be even and divisible by 2*{p} coordinates"
        )
    d_per = d_out // p
    i = np.arange(d_per // 2, dtype=np.float64)
    inv_freq = FREQ_BASE ** (-2.0 * i / d_per)  # (d_per/2,)
    angles = positions[..., :, None] * inv_freq  # (..., P, d_per/2)
    out = np.empty(positions.shape[:-1] + (p, d_per), dtype=np.float64)
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out.reshape(positions.shape[:-1] + (d_out,))
