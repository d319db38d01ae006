"""Restoration-quality metrics: SNR and a global-window SSIM."""
import math

import numpy as np

from fairpd.errors import DimensionError, MetricError

SNR_CAP_DB = 300.0


def snr(x, x_star):
    """``10 log10(||x*||^2 / ||x - x*||^2)`` in dB.

    Perfect recovery (error norm below 1e-14) returns the 300 dB cap.
    """
    x = np.asarray(x, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x.shape != x_star.shape:
        raise DimensionError(f"snr: shapes differ {x.shape} vs {x_star.shape}")
    ref = float(np.linalg.norm(x_star))
    if ref == 0.0:
        raise MetricError("snr undefined for an all-zero reference")
    err = float(np.linalg.norm(x - x_star))
    if err < 1e-14:
        return SNR_CAP_DB
    return 10.0 * math.log10(ref**2 / err**2)


def ssim(x, x_star, dynamic_range=1.0):
    """Single-window SSIM over all pixels.

    Uses the usual ``(mu1^2 + mu2^2 + c1)`` luminance denominator with
    ``c1 = (0.01 R)^2`` and ``c2 = (0.03 R)^2``.
    """
    x = np.asarray(x, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x.shape != x_star.shape:
        raise DimensionError(f"ssim: shapes differ {x.shape} vs {x_star.shape}")
    c1 = (0.01 * dynamic_range) ** 2
    c2 = (0.03 * dynamic_range) ** 2
    mu1 = x_star.mean()
    mu2 = x.mean()
    var1 = ((x_star - mu1) ** 2).mean()
    var2 = ((x - mu2) ** 2).mean()
    cov = ((x_star - mu1) * (x - mu2)).mean()
    num = (2 * mu1 * mu2 + c1) * (2 * cov + c2)
    den = (mu1**2 + mu2**2 + c1) * (var1 + var2 + c2)
    return float(num / den)
