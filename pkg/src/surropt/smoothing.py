"""Gaussian kernel subdensity estimation and the bandwidth rule it uses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateArmError, DegenerateSampleError, ValidationError

_SQRT2PI = float(np.sqrt(2.0 * np.pi))


def weighted_quantile(values, weights, q):
    """Quantiles of weighted values, matching numpy's default (type 7) when
    weights are equal.

    Sorted values are placed at knots ``(c_k - c_1) / (1 - c_1)`` where
    ``c_k`` are normalized cumulative weights, and quantiles interpolate
    linearly between knots.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        raise ValidationError("no values to take quantiles of")
    if (weights < 0).any():
        raise ValidationError("quantile weights must be nonnegative")
    keep = weights > 0
    if not keep.any():
        raise ValidationError("quantile weights sum to zero")
    values, weights = values[keep], weights[keep]
    order = np.argsort(values, kind="stable")
    v = values[order]
    c = np.cumsum(weights[order])
    if c[-1] <= 0:
        raise ValidationError("quantile weights sum to zero")
    c = c / c[-1]
    if c[0] >= 1.0:
        return np.interp(q, [0.0, 1.0], [v[0], v[0]])
    p = (c - c[0]) / (1.0 - c[0])
    return np.interp(q, p, v)


def bandwidth(values, weights=None, c0=0.06):
    """Data-driven kernel bandwidth with mild undersmoothing.

    Uses ``1.06 * min(sd, IQR / 1.34) * m**(-1/5)`` and shrinks it by a
    further ``m**(-c0)`` so that smoothing bias vanishes faster than the
    sampling error of downstream functionals. ``m`` counts values with
    positive weight; sd and IQR are weighted. When the IQR collapses to zero
    under heavy ties, the sd alone sets the scale.
    """
    values = np.asarray(values, dtype=float)
    if weights is None:
        weights = np.ones_like(values)
    weights = np.asarray(weights, dtype=float)
    pos = weights > 0
    v, w = values[pos], weights[pos]
    m = int(pos.sum())
    if len(np.unique(v)) < 2:
        raise DegenerateSampleError(
            f"bandwidth needs at least 2 distinct weighted values, got {len(np.unique(v))}"
        )
    mean = np.average(v, weights=w)
    sd = float(np.sqrt(np.average((v - mean) ** 2, weights=w)))
    q25, q75 = weighted_quantile(v, w, [0.25, 0.75])
    candidates = [s for s in (sd, (q75 - q25) / 1.34) if s > 0]
    scale = min(candidates)
    return 1.06 * scale * m ** (-0.2) * m ** (-c0)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and bandwidth for subdensity estimation."""

    bandwidth: float
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ValidationError(f"unsupported kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise ValidationError(f"bandwidth must be positive, got {self.bandwidth!r}")


def kernel_matrix(points, grid, h, chunk=65536):
    """Matrix ``K[i, j] = K_h(points[i] - grid[j])`` for the Gaussian kernel.

    Accumulation is chunked over points so huge inputs stay within memory.
    Returns a dense (len(points), len(grid)) array when points fit in one
    chunk; otherwise use :func:`kernel_column_sums`.
    """
    points = np.asarray(points, dtype=float)
    grid = np.asarray(grid, dtype=float)
    z = (points[:, None] - grid[None, :]) / h
    return np.exp(-0.5 * z * z) / (h * _SQRT2PI)


def kernel_column_sums(points, grid, h, row_weights=None, chunk=65536):
    """Column sums of the kernel matrix, optionally row-weighted, chunked."""
    points = np.asarray(points, dtype=float)
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(len(grid))
    for lo in range(0, len(points), chunk):
        km = kernel_matrix(points[lo : lo + chunk], grid, h)
        if row_weights is None:
            out += km.sum(axis=0)
        else:
            out += row_weights[lo : lo + chunk] @ km
    return out


@dataclass(frozen=True)
class GridFunction:
    """Function tabulated on a grid; evaluates by linear interpolation with
    clamped extrapolation beyond the grid range."""

    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or len(g) < 2:
            raise ValidationError("grid and values must be equal-length 1-d arrays of size >= 2")
        if not (np.diff(g) > 0).all():
            raise ValidationError("grid must be strictly increasing")

    def __call__(self, s):
        return np.interp(s, self.grid, self.values)


def subdensity(data, arm, t, t0, weights, grid, spec):
    """Smoothed joint subdensity of the surrogate time and survival past ``t``.

    Estimates ``f_a(s, t, t0)``: the density in ``s`` of subjects whose
    surrogate occurred at ``s <= t0`` and who survived beyond ``t``, weighted
    by IPCW weights at ``t``. Normalization is by total (effective) weight in
    the arm, so the grid integral approximates P(T > t, S <= t0).
    """
    w = weights.effective()
    m_arm = data.arm == arm
    den = float(np.sum(w[m_arm]))
    if den <= 0:
        raise DegenerateArmError(f"zero total weight in arm {arm}")
    contrib = m_arm & (data.s <= t0) & (data.x > t)
    nums = kernel_column_sums(data.s[contrib], grid, spec.bandwidth, row_weights=w[contrib])
    return GridFunction(
        grid=np.asarray(grid, dtype=float),
        values=nums / den,
        meta={"arm": arm, "t": float(t), "t0": float(t0), "bandwidth": spec.bandwidth},
    )
