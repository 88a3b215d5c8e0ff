"""Optimal landmark transformation of surrogate information and the
proportion of treatment effect it explains.

The treatment effect on the primary outcome is the survival difference
``delta(t) = P(T > t | arm 1) - P(T > t | arm 0)``. Subjects still under
observation at a landmark ``t0`` carry surrogate information: either the
observed surrogate time (when it occurred by ``t0``) or the fact that it has
not occurred yet. A transformation of that information is fit to be optimal
for predicting survival past ``t``: it minimizes the mean squared prediction
error in the treated arm subject to being calibrated (mean-unbiased) in the
control arm. The proportion of treatment effect explained (PTE) is the ratio
of the treatment effect on the transformed score to the effect on survival.

Estimation is fully nonparametric: censoring is handled by inverse
probability of censoring weights, and the density of observed surrogate
times by Gaussian kernel smoothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import SnapshotKind, snapshot
from .errors import (
    DegenerateArmError,
    EmptyStratumError,
    IllDefinedPTEError,
    ValidationError,
)
from .smoothing import GridFunction, bandwidth, kernel_matrix
from .survival import CensoringKmEngine, ipcw_numerators, ipcw_values


@dataclass(frozen=True)
class AnalysisOptions:
    """Tuning constants for the estimators.

    grid_size
        Number of evaluation points for the smoothed surrogate densities.
    eps_rel
        Relative floor under the treated-arm landmark subdensity; grid
        points below ``eps_rel * max`` are dropped from all integrals.
    min_delta
        Treatment effects smaller than this in absolute value make the PTE
        ratio ill defined. A treatment effect below ``-min_delta`` triggers
        an internal arm-label swap, reported in diagnostics.
    constraint_tol
        Calibration residual above which diagnostics carry a warning flag.
    c0
        Undersmoothing exponent of the bandwidth rule.
    bandwidth
        Explicit kernel bandwidth; overrides the data-driven rule.
    pooled_bandwidth
        Use one bandwidth from both arms' surrogate times (default), or one
        per arm.
    """

    grid_size: int = 400
    eps_rel: float = 1e-3
    grid_floor: float = 1e-6
    min_delta: float = 1e-3
    constraint_tol: float = 0.02
    c0: float = 0.06
    bandwidth: float | None = None
    pooled_bandwidth: bool = True

    def validate(self):
        if self.grid_size < 10:
            raise ValidationError("grid_size must be at least 10")
        for name in ("eps_rel", "grid_floor", "min_delta", "constraint_tol", "c0"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValidationError("bandwidth override must be positive")


@dataclass(frozen=True)
class OptimalTransform:
    """Fitted transformation of landmark surrogate information.

    A subject whose follow-up ended by ``t0`` scores 0. A subject under
    observation past ``t0`` scores ``observed_curve(s)`` when the surrogate
    occurred at ``s <= t0``, and ``event_free_value`` otherwise.
    ``multiplier`` is the Lagrange multiplier of the control-arm calibration
    constraint; it is 0 when the surrogate explains the effect completely.
    """

    t: float
    t0: float
    multiplier: float
    observed_curve: GridFunction
    event_free_value: float
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PteResult:
    """Point estimate of a PTE variant with its ingredients.

    ``pte = delta_g / delta`` where ``delta`` is the treatment effect on the
    primary outcome scale of the variant and ``delta_g`` the effect on the
    transformed score. ``se``/``ci`` are attached by resampling inference.
    """

    variant: str
    t0: float
    delta: float
    delta_g: float
    pte: float
    t: float | None = None
    tau: float | None = None
    se: float | None = None
    ci: tuple | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.se is None) != (self.ci is None):
            raise ValidationError("se and ci must be set together")
        if abs(self.pte - self.delta_g / self.delta) > 1e-12 * max(1.0, abs(self.pte)):
            raise ValidationError("pte must equal delta_g / delta")

    def with_interval(self, se, ci):
        return PteResult(
            variant=self.variant,
            t0=self.t0,
            delta=self.delta,
            delta_g=self.delta_g,
            pte=self.pte,
            t=self.t,
            tau=self.tau,
            se=se,
            ci=ci,
            diagnostics=self.diagnostics,
        )


def _check_times(t, t0):
    if not (t0 > 0 and np.isfinite(t0)):
        raise ValidationError(f"t0 must be positive and finite, got {t0!r}")
    if not (t >= t0):
        raise ValidationError(f"need t >= t0, got t={t!r}, t0={t0!r}")


class LandmarkWorkspace:
    """Precomputed state for one dataset at one landmark.

    Everything that does not depend on the evaluation time or on resampling
    multipliers is done once here: per-arm censoring Kaplan-Meier layout,
    the surrogate evaluation grid, the kernel bandwidth, and the kernel
    matrices of the surrogate-by-``t0`` contributors. Transform fits at any
    ``t >= t0`` and any multiplier vector then reduce to cumulative sums and
    a few matrix-vector products, which keeps resampling loops cheap.
    """

    def __init__(self, data, t0, options=None):
        self.opts = options or AnalysisOptions()
        self.opts.validate()
        if not (t0 > 0 and np.isfinite(t0)):
            raise ValidationError(f"t0 must be positive and finite, got {t0!r}")
        self.data = data
        self.t0 = float(t0)
        self.x = data.x
        self.delta_ind = data.delta
        self.arm = data.arm
        self.s = data.s
        self.n = data.n
        self.ids = [r.id for r in data.records]

        self.pos = {a: np.flatnonzero(self.arm == a) for a in (0, 1)}
        self.km = {
            a: CensoringKmEngine(self.x[self.pos[a]], self.delta_ind[self.pos[a]] == 0)
            for a in (0, 1)
        }
        self._km_base = {a: self.km[a].values(None) for a in (0, 1)}
        self._t_cache = {}
        self._w_base = {}

        self.s_le_t0 = self.s <= self.t0  # False for absent surrogate
        self.s_gt_t0 = ~self.s_le_t0
        self.cand = {a: np.flatnonzero((self.arm == a) & self.s_le_t0) for a in (0, 1)}

        self._kernels_ready = False
        self.grid = None
        self.h = {}
        self._K = {}

    # -- weights ---------------------------------------------------------

    def _t_entry(self, t):
        entry = self._t_cache.get(t)
        if entry is None:
            numer = ipcw_numerators(self.x, self.delta_ind, t)
            idx = {}
            for a in (0, 1):
                xa = np.minimum(self.x[self.pos[a]], t)
                idx[a] = np.searchsorted(self.km[a].jump_times, xa, side="right")
            entry = (numer, idx, self.x > t)
            self._t_cache[t] = entry
        return entry

    def alive_mask(self, t):
        return self._t_entry(t)[2]

    def weights_at(self, t, v=None):
        """Effective IPCW weight vector at ``t`` (multipliers included)."""
        if v is None and t in self._w_base:
            return self._w_base[t]
        numer, idx, _ = self._t_entry(t)
        w = np.zeros(self.n)
        for a in (0, 1):
            pos = self.pos[a]
            vals = self._km_base[a] if v is None else self.km[a].values(v[pos])
            g_at = np.concatenate(([1.0], vals))[idx[a]]
            wa = ipcw_values(
                self.x[pos],
                self.delta_ind[pos],
                t,
                g_at,
                subject_ids=[self.ids[i] for i in pos],
            )
            w[pos] = wa
        if v is None:
            self._w_base[t] = w
            return w
        return w * v

    # -- kernels ---------------------------------------------------------

    def _prepare_kernels(self):
        if self._kernels_ready:
            return
        opts = self.opts
        s_pool = self.s[self.s_le_t0 & (self.s > 0)]
        if s_pool.size == 0:
            raise EmptyStratumError(
                "no observed surrogate times at or before the landmark",
                counts={"surrogate_by_t0": 0},
            )
        lo = max(opts.grid_floor, float(s_pool.min()))
        hi = min(self.t0, float(s_pool.max()))
        if not hi > lo:
            raise EmptyStratumError(
                "surrogate support too narrow for a smoothing grid",
                counts={"surrogate_by_t0": int(s_pool.size)},
            )
        self.grid = np.linspace(lo, hi, opts.grid_size)

        w0 = self.weights_at(self.t0)
        bw_mask = self.s_le_t0 & (self.x > self.t0)
        if opts.bandwidth is not None:
            self.h = {0: opts.bandwidth, 1: opts.bandwidth}
        elif opts.pooled_bandwidth:
            h = bandwidth(self.s[bw_mask], w0[bw_mask], c0=opts.c0)
            self.h = {0: h, 1: h}
        else:
            self.h = {}
            for a in (0, 1):
                m = bw_mask & (self.arm == a)
                self.h[a] = bandwidth(self.s[m], w0[m], c0=opts.c0)
        for a in (0, 1):
            self._K[a] = kernel_matrix(self.s[self.cand[a]], self.grid, self.h[a])
        self._kernels_ready = True

    def _subdensity(self, arm, t, w):
        """f_hat(s, t, t0) over the grid for one arm, given effective weights at t."""
        cand = self.cand[arm]
        alive = self.x[cand] > t
        row_w = w[cand] * alive
        den = float(np.sum(w[self.pos[arm]]))
        if den <= 0:
            raise DegenerateArmError(f"zero total weight in arm {arm}")
        return (row_w @ self._K[arm]) / den

    # -- fits --------------------------------------------------------------

    def marginals(self, t, w):
        """Per-arm weighted survival P(T > t) from effective weights at ``t``."""
        alive = self.alive_mask(t)
        out = {}
        for a in (0, 1):
            pos = self.pos[a]
            den = float(np.sum(w[pos]))
            if den <= 0:
                raise DegenerateArmError(f"zero total weight in arm {a} at t={t:g}")
            out[a] = float(np.sum(w[pos] * alive[pos])) / den
        return out

    def joint_tails(self, t, w):
        """Per-arm weighted P(T > t, S > t0) from effective weights at ``t``."""
        alive = self.alive_mask(t)
        out = {}
        for a in (0, 1):
            pos = self.pos[a]
            den = float(np.sum(w[pos]))
            if den <= 0:
                raise DegenerateArmError(f"zero total weight in arm {a} at t={t:g}")
            num = float(np.sum(w[pos] * (alive & self.s_gt_t0)[pos]))
            out[a] = num / den
        return out

    def fit(self, t, v=None, treat=1, w_t0=None, w_t=None):
        """Fit the optimal transform at horizon ``t`` with arm ``treat`` treated.

        Returns a dict with the multiplier, the transformed-score values on
        the retained grid, the event-free value, per-arm means of the score,
        and the marginal survival estimates that make up the treatment
        effect. ``w_t0``/``w_t`` allow reusing weight vectors across calls
        with the same multipliers.
        """
        self._prepare_kernels()
        ctrl = 1 - treat
        t0 = self.t0
        if w_t0 is None:
            w_t0 = self.weights_at(t0, v)
        if w_t is None:
            w_t = self.weights_at(t, v) if t != t0 else w_t0

        mu_t = self.marginals(t, w_t)
        mu_t0 = self.marginals(t0, w_t0)
        tails_t0 = self.joint_tails(t0, w_t0)
        P_c_t0 = tails_t0[ctrl]
        P_t_t0 = tails_t0[treat]
        P_t_t = self.joint_tails(t, w_t)[treat]

        if P_t_t0 <= 0:
            raise EmptyStratumError(
                "treated arm has no weight on subjects past the landmark "
                "without a surrogate by it",
                counts={"treated_event_free": 0},
            )

        f_c = self._subdensity(ctrl, t0, w_t0)
        f_t0 = self._subdensity(treat, t0, w_t0)
        f_t = self._subdensity(treat, t, w_t)
        fmax = float(f_t0.max())
        if fmax <= 0:
            raise EmptyStratumError(
                "treated arm has no weighted surrogate-by-landmark subjects "
                "alive past the landmark",
                counts={"treated_surrogate_by_t0_alive": 0},
            )
        keep = f_t0 >= self.opts.eps_rel * fmax
        if int(keep.sum()) < 2:
            raise EmptyStratumError(
                "fewer than 2 grid points retained by the density floor",
                counts={"retained_grid_points": int(keep.sum())},
            )
        gk = self.grid[keep]
        fc_k, ft0_k, ft_k = f_c[keep], f_t0[keep], f_t[keep]

        i_den = float(np.trapezoid(fc_k * fc_k / ft0_k, gk)) + P_c_t0 * P_c_t0 / P_t_t0
        i_num = float(np.trapezoid(fc_k * ft_k / ft0_k, gk))
        lam = (mu_t[ctrl] - i_num - P_c_t0 * P_t_t / P_t_t0) / i_den
        g1 = (lam * fc_k + ft_k) / ft0_k
        g2 = (lam * P_c_t0 + P_t_t) / P_t_t0

        alive_t0 = self.alive_mask(t0)
        score = np.zeros(self.n)
        m_s = alive_t0 & self.s_le_t0
        score[m_s] = np.interp(self.s[m_s], gk, g1)
        score[alive_t0 & self.s_gt_t0] = g2
        mu_g = {}
        for a in (0, 1):
            pos = self.pos[a]
            mu_g[a] = float(np.sum(w_t0[pos] * score[pos]) / np.sum(w_t0[pos]))

        return {
            "treat": treat,
            "t": float(t),
            "lam": lam,
            "grid": gk,
            "g1": g1,
            "g2": g2,
            "mu_t": mu_t,
            "mu_t0": mu_t0,
            "mu_g": mu_g,
            "tail_ctrl_t0": P_c_t0,
            "tail_treat_t0": P_t_t0,
            "tail_treat_t": P_t_t,
            "delta": mu_t[treat] - mu_t[ctrl],
            "delta_g": mu_g[treat] - mu_g[ctrl],
            "constraint_residual": abs(mu_g[ctrl] - mu_t[ctrl]),
            "dropped_grid_points": int((~keep).sum()),
        }

    def ind_fit(self, t, v=None, treat=1, w_t0=None, w_t=None):
        """Variant using only the landmark survival indicator, no surrogate timing."""
        ctrl = 1 - treat
        if w_t0 is None:
            w_t0 = self.weights_at(self.t0, v)
        if w_t is None:
            w_t = self.weights_at(t, v) if t != self.t0 else w_t0
        mu_t = self.marginals(t, w_t)
        mu_t0 = self.marginals(self.t0, w_t0)
        if mu_t0[treat] <= 0:
            raise EmptyStratumError(
                "treated arm has no weight past the landmark",
                counts={"treated_alive_t0": 0},
            )
        if mu_t0[ctrl] <= 0:
            raise EmptyStratumError(
                "control arm has no weight past the landmark",
                counts={"control_alive_t0": 0},
            )
        lam_ind = (mu_t[ctrl] - mu_t0[ctrl] * mu_t[treat] / mu_t0[treat]) / (
            mu_t0[ctrl] ** 2 / mu_t0[treat]
        )
        g2_ind = (lam_ind * mu_t0[ctrl] + mu_t[treat]) / mu_t0[treat]
        return {
            "treat": treat,
            "t": float(t),
            "lam": lam_ind,
            "g2": g2_ind,
            "mu_t": mu_t,
            "mu_t0": mu_t0,
            "delta": mu_t[treat] - mu_t[ctrl],
            "delta_g": g2_ind * (mu_t0[treat] - mu_t0[ctrl]),
        }


def decide_treat(ws, t, w_t):
    """Pick the treated-arm role from the sign of the survival difference.

    Arm 1 is treated unless the effect is clearly reversed, in which case
    the roles swap. An effect within ``min_delta`` of zero makes the PTE
    ratio ill defined and raises instead.
    """
    mu = ws.marginals(t, w_t)
    d = mu[1] - mu[0]
    if d < -ws.opts.min_delta:
        return 0
    if abs(d) <= ws.opts.min_delta:
        raise IllDefinedPTEError(
            f"treatment effect {d:.2e} at t={t:g} is too small "
            f"for a PTE ratio (threshold {ws.opts.min_delta:g})"
        )
    return 1


def estimate_transform(data, t, t0, options=None):
    """Fit the optimal surrogate transformation on censored trial data.

    Arm 1 is treated as the treated arm; no label swapping is applied here.
    Diagnostics carry the calibration residual against ``constraint_tol``,
    the bandwidth, and how many grid points the density floor dropped.
    """
    _check_times(t, t0)
    ws = LandmarkWorkspace(data, t0, options)
    fit = ws.fit(t)
    diags = _transform_diags(ws, fit)
    return OptimalTransform(
        t=float(t),
        t0=float(t0),
        multiplier=fit["lam"],
        observed_curve=GridFunction(fit["grid"], fit["g1"], meta={"t": float(t), "t0": float(t0)}),
        event_free_value=fit["g2"],
        diagnostics=diags,
    )


def _transform_diags(ws, fit):
    return {
        "constraint_residual": fit["constraint_residual"],
        "constraint_ok": fit["constraint_residual"] <= ws.opts.constraint_tol,
        "bandwidth": dict(ws.h),
        "dropped_grid_points": fit["dropped_grid_points"],
        "grid_range": (float(ws.grid[0]), float(ws.grid[-1])),
    }


def apply_transform(transform, snap):
    """Score one landmark snapshot under a fitted transform.

    Accepts a SurrogateSnapshot (or a SubjectRecord, which is snapshotted at
    the transform's landmark first). Surrogate times beyond the tabulated
    grid use the clamped boundary values.
    """
    if not hasattr(snap, "kind"):
        snap = snapshot(snap, transform.t0)
    if snap.kind is SnapshotKind.PRIMARY_BEFORE_T0:
        return 0.0
    if snap.kind is SnapshotKind.SURROGATE_BY_T0:
        return float(transform.observed_curve(snap.s))
    return float(transform.event_free_value)


def estimate_pte(data, t, t0, options=None, *, workspace=None):
    """Estimate the proportion of treatment effect explained at horizon ``t``.

    Fits the optimal transform of surrogate information at landmark ``t0``
    and returns the ratio of the treatment effect on the transformed score
    to the effect on survival past ``t``. When the observed effect is
    clearly reversed the arms are swapped internally and
    ``diagnostics["labels_swapped"]`` is set.
    """
    _check_times(t, t0)
    ws = workspace or LandmarkWorkspace(data, t0, options)
    w_t0 = ws.weights_at(ws.t0)
    w_t = ws.weights_at(t) if t != ws.t0 else w_t0
    treat = decide_treat(ws, t, w_t)
    fit = ws.fit(t, treat=treat, w_t0=w_t0, w_t=w_t)
    swapped = treat == 0
    diags = _transform_diags(ws, fit)
    diags["labels_swapped"] = swapped
    diags["multiplier"] = fit["lam"]
    diags["event_free_value"] = fit["g2"]
    return PteResult(
        variant="pte",
        t=float(t),
        t0=float(t0),
        delta=fit["delta"],
        delta_g=fit["delta_g"],
        pte=fit["delta_g"] / fit["delta"],
        diagnostics=diags,
    )


def estimate_pte_ind(data, t, t0, options=None, *, workspace=None):
    """PTE using only the landmark survival indicator.

    The transform reduces to a single value for subjects under observation
    past ``t0``; comparing this PTE with :func:`estimate_pte` shows the
    added value of the surrogate's timing information.
    """
    _check_times(t, t0)
    ws = workspace or LandmarkWorkspace(data, t0, options)
    w_t0 = ws.weights_at(ws.t0)
    w_t = ws.weights_at(t) if t != ws.t0 else w_t0
    treat = decide_treat(ws, t, w_t)
    fit = ws.ind_fit(t, treat=treat, w_t0=w_t0, w_t=w_t)
    swapped = treat == 0
    return PteResult(
        variant="pte_ind",
        t=float(t),
        t0=float(t0),
        delta=fit["delta"],
        delta_g=fit["delta_g"],
        pte=fit["delta_g"] / fit["delta"],
        diagnostics={
            "labels_swapped": swapped,
            "multiplier": fit["lam"],
            "event_free_value": fit["g2"],
        },
    )
