"""Resampling inference for the PTE estimators.

Standard errors come from perturbation resampling: every subject's
contribution to every weighted quantity, including the censoring
Kaplan-Meier curves, is multiplied by a positive unit-mean random draw, and
the whole pipeline is re-solved. The spread of the re-solved estimates
across replicates estimates the sampling variability without an analytic
variance formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EstimationError,
    IllDefinedPTEError,
    UnreliableInferenceError,
    ValidationError,
)
from .pte import LandmarkWorkspace, decide_treat
from .rmst import TimeGrid, _rmst_pieces, node_weights

LANDMARK_ESTIMATORS = ("pte", "pte_ind", "g2", "delta")
RMST_ESTIMATORS = ("pte_rmst", "pte_rmst_ind")
ESTIMATORS = LANDMARK_ESTIMATORS + RMST_ESTIMATORS

_LAWS = ("exponential", "ones")


@dataclass(frozen=True)
class PerturbationConfig:
    """Resampling plan: replicate count, seed, and multiplier law.

    The law must be a positive distribution with mean 1 (and, for the
    standard-error interpretation, variance 1). ``"exponential"`` is the
    default; ``"ones"`` degenerates every replicate to the point estimate
    and exists for exactness tests. A callable ``(rng, n) -> array`` is
    accepted for custom laws and is trusted to have mean 1.
    ``quantile_ci`` switches the 95% interval from normal-approximation to
    replicate percentiles.
    """

    replicates: int = 500
    seed: int = 0
    law: object = "exponential"
    quantile_ci: bool = False

    def __post_init__(self):
        if self.replicates < 2:
            raise ValidationError("need at least 2 perturbation replicates")
        if not (isinstance(self.law, str) and self.law in _LAWS) and not callable(
            self.law
        ):
            raise ValidationError(f"law must be one of {_LAWS} or a callable")

    def multipliers(self, n):
        """Yield ``replicates`` multiplier vectors, deterministic given the seed."""
        seed = self.seed
        if not isinstance(seed, np.random.SeedSequence):
            seed = np.random.SeedSequence(seed)
        for child in seed.spawn(self.replicates):
            rng = np.random.default_rng(child)
            if self.law == "exponential":
                yield rng.exponential(1.0, n)
            elif self.law == "ones":
                yield np.ones(n)
            else:
                yield np.asarray(self.law(rng, n), dtype=float)


@dataclass(frozen=True)
class IntervalEstimate:
    """Point estimate with resampling standard error and 95% interval.

    ``replicates`` keeps every replicate value (NaN where the replicate
    failed) for diagnostics; ``failures`` counts the NaNs. ``reliable`` is
    False once failures reach a tenth of the replicates.
    """

    point: float
    se: float
    ci95: tuple
    replicates: tuple = field(repr=False)
    failures: int = 0

    @property
    def reliable(self):
        return self.failures * 10 < len(self.replicates)

    def covers(self, value):
        return self.ci95[0] <= value <= self.ci95[1]


def _interval(point, values, config):
    values = np.asarray(values)
    ok = np.isfinite(values)
    failures = int((~ok).sum())
    if ok.sum() < 2:
        raise UnreliableInferenceError(
            f"only {int(ok.sum())} of {values.size} perturbation replicates "
            "succeeded",
            partial=None,
        )
    se = float(np.std(values[ok], ddof=1))
    if config.quantile_ci:
        ci = (
            float(np.percentile(values[ok], 2.5)),
            float(np.percentile(values[ok], 97.5)),
        )
    else:
        ci = (point - 1.96 * se, point + 1.96 * se)
    return IntervalEstimate(
        point=point, se=se, ci95=ci, replicates=tuple(values), failures=failures
    )


def _landmark_scalars(ws, t, v, metrics, strict=False):
    """One replicate's values for the fixed-horizon metrics, NaN on failure."""
    out = {m: math.nan for m in metrics}
    try:
        w_t0 = ws.weights_at(ws.t0, v)
        w_t = ws.weights_at(t, v) if t != ws.t0 else w_t0
        mu = ws.marginals(t, w_t)
    except EstimationError:
        if strict:
            raise
        return out
    if "delta" in out:
        out["delta"] = mu[1] - mu[0]
    try:
        treat = decide_treat(ws, t, w_t)
    except EstimationError:
        if strict and set(metrics) != {"delta"}:
            raise
        return out
    if "pte" in out or "g2" in out:
        try:
            fit = ws.fit(t, treat=treat, w_t0=w_t0, w_t=w_t)
            if "pte" in out:
                out["pte"] = fit["delta_g"] / fit["delta"]
            if "g2" in out:
                out["g2"] = fit["g2"]
        except EstimationError:
            if strict:
                raise
    if "pte_ind" in out:
        try:
            fit = ws.ind_fit(t, treat=treat, w_t0=w_t0, w_t=w_t)
            out["pte_ind"] = fit["delta_g"] / fit["delta"]
        except EstimationError:
            if strict:
                raise
    return out


def _rmst_scalars(ws, grid, v, metrics, strict=False):
    """One replicate's values for the restricted-mean metrics, NaN on failure."""
    out = {m: math.nan for m in metrics}
    try:
        weights = node_weights(ws, grid, v)
        d1_pieces = _rmst_pieces(ws, grid, 1, weights, ind=True)
    except EstimationError:
        if strict:
            raise
        return out
    d1 = d1_pieces[0]
    thresh = ws.opts.min_delta * grid.tau
    if abs(d1) <= thresh:
        if strict:
            raise IllDefinedPTEError(
                f"restricted-mean treatment effect {d1:.2e} is too small for "
                f"a PTE ratio (threshold {thresh:g})"
            )
        return out
    treat = 0 if d1 < -thresh else 1
    if grid.t0 == grid.tau:
        for m in out:
            out[m] = 1.0
        return out
    for name, ind in (("pte_rmst", False), ("pte_rmst_ind", True)):
        if name not in out:
            continue
        try:
            if ind and treat == 1:
                delta_rst, before, after, _ = d1_pieces
            else:
                delta_rst, before, after, _ = _rmst_pieces(ws, grid, treat, weights, ind)
            out[name] = (before + after) / delta_rst
        except EstimationError:
            if strict:
                raise
    return out


def perturb_landmark_metrics(ws, t, config, metrics=LANDMARK_ESTIMATORS):
    """Intervals for several fixed-horizon metrics sharing each replicate's fit.

    Returns a dict of :class:`IntervalEstimate`; unreliable results are
    flagged, not raised, so study loops can count them.
    """
    points = _landmark_scalars(ws, t, None, metrics, strict=True)
    draws = {m: np.empty(config.replicates) for m in metrics}
    for b, v in enumerate(config.multipliers(ws.n)):
        vals = _landmark_scalars(ws, t, v, metrics)
        for m in metrics:
            draws[m][b] = vals[m]
    return {m: _interval(points[m], draws[m], config) for m in metrics}


def perturb_rmst_metrics(ws, tau, config, metrics=RMST_ESTIMATORS, grid=None):
    """Intervals for the restricted-mean metrics sharing node fits per replicate."""
    grid = grid or TimeGrid.build(ws.t0, float(tau))
    points = _rmst_scalars(ws, grid, None, metrics, strict=True)
    draws = {m: np.empty(config.replicates) for m in metrics}
    for b, v in enumerate(config.multipliers(ws.n)):
        vals = _rmst_scalars(ws, grid, v, metrics)
        for m in metrics:
            draws[m][b] = vals[m]
    return {m: _interval(points[m], draws[m], config) for m in metrics}


def perturbed_estimate(data, estimator, params, config=None, options=None):
    """Resampling interval for one estimator.

    ``params`` carries the estimator's time arguments: ``t`` and ``t0`` for
    the fixed-horizon metrics (``pte``, ``pte_ind``, ``g2``, ``delta``),
    ``t0`` and ``tau`` for the restricted-mean ones. Raises
    :class:`UnreliableInferenceError`, carrying the partial result, when
    more than a tenth of the replicates fail.
    """
    config = config or PerturbationConfig()
    if estimator not in ESTIMATORS:
        raise ValidationError(
            f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}"
        )
    if "t0" not in params:
        raise ValidationError("params must include t0")
    ws = LandmarkWorkspace(data, params["t0"], options)
    if estimator in LANDMARK_ESTIMATORS:
        if "t" not in params:
            raise ValidationError(f"params must include t for {estimator!r}")
        result = perturb_landmark_metrics(ws, float(params["t"]), config, (estimator,))
    else:
        if "tau" not in params:
            raise ValidationError(f"params must include tau for {estimator!r}")
        grid = None
        if params.get("dt") is not None:
            grid = TimeGrid.build(ws.t0, float(params["tau"]), float(params["dt"]))
        result = perturb_rmst_metrics(
            ws, float(params["tau"]), config, (estimator,), grid=grid
        )
    interval = result[estimator]
    if interval.failures * 10 > config.replicates:
        raise UnreliableInferenceError(
            f"{interval.failures} of {config.replicates} perturbation "
            f"replicates failed for {estimator!r}",
            partial=interval,
        )
    return interval
