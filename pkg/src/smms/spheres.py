"""Round-sphere constants for real dimension parameters.

Gamma-function forms so non-integer exponents (the real-weight
extension) work at every call site:

    sphere_area(k)  = |S^{k-1}| = 2 pi^{k/2} / Gamma(k/2)
    ball_volume_coefficient(k) = omega_k = pi^{k/2} / Gamma(k/2 + 1)

with the identity |S^{k-1}| = k * omega_k.
"""

from __future__ import annotations

import math

from scipy.special import gamma

__all__ = ["sphere_area", "ball_volume_coefficient"]


def sphere_area(k):
    """Surface measure of the unit sphere S^{k-1} in R^k, real k > 0."""
    if k <= 0:
        raise ValueError("k must be positive")
    return 2.0 * math.pi ** (k / 2.0) / gamma(k / 2.0)


def ball_volume_coefficient(k):
    """Volume of the unit ball in R^k, real k > 0."""
    if k <= 0:
        raise ValueError("k must be positive")
    return math.pi ** (k / 2.0) / gamma(k / 2.0 + 1.0)
