"""Censoring Kaplan-Meier curves and inverse-probability-of-censoring weights.

Weighted means over subjects use ``V_i * w_i`` where ``w_i`` is the IPCW
weight at the evaluation time and ``V_i`` an optional positive resampling
multiplier. The same multipliers feed the censoring curve itself, so one
multiplier vector perturbs every weighted quantity coherently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateArmError, PositivityError, ValidationError

POSITIVITY_FLOOR = 1e-8


@dataclass(frozen=True)
class StepSurvivalCurve:
    """Right-continuous step function with value 1 before the first jump.

    ``times`` are the jump locations in increasing order and ``values`` the
    function value at and after each jump.
    """

    times: np.ndarray
    values: np.ndarray

    def evaluate(self, t):
        """Value at time(s) ``t``; right-continuous, so jumps count at ``t`` itself."""
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.concatenate(([1.0], self.values))
        return padded[idx]


class CensoringKmEngine:
    """Per-arm precomputation for repeated weighted censoring Kaplan-Meier fits.

    Sorting and tie grouping depend only on the observed times, so they are
    done once; each call with a new multiplier vector costs a few cumulative
    sums. Ties are handled with everyone still at risk at a time contributing
    to the risk set there, whatever their own outcome at that time.
    """

    def __init__(self, x, censored):
        x = np.asarray(x, dtype=float)
        censored = np.asarray(censored, dtype=float)
        self.order = np.argsort(x, kind="stable")
        xs = x[self.order]
        self.cens_sorted = censored[self.order]
        self.block_starts = np.flatnonzero(np.r_[True, np.diff(xs) > 0])
        self.block_times = xs[self.block_starts]
        # blocks containing at least one censoring event are where the curve jumps
        cens_per_block = np.add.reduceat(self.cens_sorted, self.block_starts)
        self.jump_blocks = np.flatnonzero(cens_per_block > 0)
        self.jump_times = self.block_times[self.jump_blocks]
        self.n = len(x)

    def values(self, v=None):
        """Curve values after each jump time, for multiplier vector ``v``."""
        vs = np.ones(self.n) if v is None else np.asarray(v, dtype=float)[self.order]
        d = np.add.reduceat(vs * self.cens_sorted, self.block_starts)[self.jump_blocks]
        csum = np.concatenate(([0.0], np.cumsum(vs)))
        at_risk = csum[-1] - csum[self.block_starts[self.jump_blocks]]
        return np.cumprod(1.0 - d / at_risk)

    def curve(self, v=None):
        return StepSurvivalCurve(self.jump_times, self.values(v))


def censoring_km(data, arm, perturb=None):
    """Kaplan-Meier estimate of the censoring survival function for one arm.

    Censoring is the event (``delta == 0``); primary events are removals.
    ``perturb`` optionally weights each subject's risk-set and event
    contribution by a positive multiplier, indexed like ``data``.
    """
    mask = data.arm == arm
    if not mask.any():
        raise DegenerateArmError(f"no subjects in arm {arm}")
    eng = CensoringKmEngine(data.x[mask], data.delta[mask] == 0)
    v = None if perturb is None else _check_mult(perturb, data.n)[mask]
    return eng.curve(v)


def _check_mult(perturb, n):
    v = np.asarray(perturb, dtype=float)
    if v.shape != (n,):
        raise ValidationError(f"perturb must have shape ({n},), got {v.shape}")
    if not (np.isfinite(v).all() and (v > 0).all()):
        raise ValidationError("perturb entries must be positive and finite")
    return v


@dataclass(frozen=True)
class WeightVector:
    """IPCW weights at a fixed time plus the multipliers to apply alongside."""

    values: np.ndarray
    t: float
    vmult: np.ndarray | None = None

    def effective(self):
        return self.values if self.vmult is None else self.values * self.vmult


def ipcw_numerators(x, delta, t):
    """1 for events by ``t`` and for anyone still under observation after ``t``."""
    return ((x <= t) & (delta == 1)) | (x > t)


def ipcw_values(x, delta, t, curve_values_at_xt, subject_ids=None):
    """Weights from precomputed censoring-curve values at ``min(x, t)``."""
    numer = ipcw_numerators(x, delta, t)
    bad = numer & (curve_values_at_xt < POSITIVITY_FLOOR)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        sid = subject_ids[i] if subject_ids is not None else str(i)
        raise PositivityError(
            f"censoring survival vanished at time {min(x[i], t):g} "
            f"needed by subject {sid!r}",
            subject_id=sid,
            time=float(min(x[i], t)),
        )
    w = np.zeros(len(x))
    w[numer] = 1.0 / curve_values_at_xt[numer]
    return w


def ipcw_weights(data, t, curves, perturb=None):
    """IPCW weight vector at time ``t`` using per-arm censoring curves.

    ``curves`` maps arm -> StepSurvivalCurve (as from :func:`censoring_km`,
    built with the same ``perturb`` when one is used).
    """
    gvals = np.empty(data.n)
    xt = np.minimum(data.x, t)
    for a in (0, 1):
        m = data.arm == a
        gvals[m] = curves[a].evaluate(xt[m])
    ids = [r.id for r in data.records]
    w = ipcw_values(data.x, data.delta, t, gvals, subject_ids=ids)
    v = None if perturb is None else _check_mult(perturb, data.n)
    return WeightVector(values=w, t=float(t), vmult=v)


def _weighted_mean(num_mask, den_mask, w_eff, what):
    den = float(np.sum(w_eff[den_mask]))
    if den <= 0:
        raise DegenerateArmError(f"zero total weight for {what}")
    return float(np.sum(w_eff[num_mask])) / den


def weighted_survival(data, arm, t, weights):
    """IPCW estimate of P(T > t) in one arm."""
    w = weights.effective()
    m = data.arm == arm
    out = _weighted_mean(m & (data.x > t), m, w, f"arm {arm}")
    assert 0.0 <= out <= 1.0
    return out


def weighted_joint_tail(data, arm, t, t0, weights):
    """IPCW estimate of P(T > t, S > t0) in one arm.

    A subject counts as ``S > t0`` when the surrogate was not observed by
    ``t0``: either no surrogate during follow-up, or one after ``t0``.
    """
    w = weights.effective()
    m = data.arm == arm
    s_gt = ~(data.s <= t0)  # NaN-safe: absent surrogate compares False
    out = _weighted_mean(m & (data.x > t) & s_gt, m, w, f"arm {arm}")
    assert 0.0 <= out <= 1.0
    return out


def km_with_ci(x, event, z=1.96):
    """Kaplan-Meier curve of an event process with Greenwood pointwise bands.

    Returns (times, survival, lower, upper) over the distinct event times,
    starting with a (0, 1, 1, 1) anchor row.
    """
    x = np.asarray(x, dtype=float)
    event = np.asarray(event, dtype=float)
    order = np.argsort(x, kind="stable")
    xs, es = x[order], event[order]
    starts = np.flatnonzero(np.r_[True, np.diff(xs) > 0])
    d = np.add.reduceat(es, starts)
    n_at_risk = len(xs) - starts
    keep = d > 0
    times = xs[starts][keep]
    d, n_at_risk = d[keep], n_at_risk[keep]
    surv = np.cumprod(1.0 - d / n_at_risk)
    # Greenwood variance; once the curve hits zero the sum no longer applies
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(n_at_risk > d, d / (n_at_risk * (n_at_risk - d)), 0.0)
    se = surv * np.sqrt(np.cumsum(terms))
    lo = np.clip(surv - z * se, 0.0, 1.0)
    hi = np.clip(surv + z * se, 0.0, 1.0)
    zero = surv <= 0
    lo[zero] = 0.0
    hi[zero] = 0.0
    times = np.concatenate(([0.0], times))
    surv = np.concatenate(([1.0], surv))
    lo = np.concatenate(([1.0], lo))
    hi = np.concatenate(([1.0], hi))
    return times, surv, lo, hi
