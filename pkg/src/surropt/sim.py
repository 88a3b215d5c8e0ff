"""Simulation benchmarks: data generators, brute-force truths, and studies.

Three generative settings produce paired potential outcomes (surrogate and
primary times under both arms) with exponential censoring. A mega-sample
oracle computes population values of every estimand from the uncensored
potential outcomes, so estimator bias and coverage can be measured without
trusting the estimator itself. ``run_study`` assembles the full Monte Carlo
table: mean estimate, empirical SE, average resampling SE, and coverage.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import math

import numpy as np

from .data import TrialDataset
from .errors import (
    EmptyStratumError,
    EstimationError,
    InternalConsistencyError,
    ValidationError,
)
from .inference import (
    PerturbationConfig,
    perturb_landmark_metrics,
    perturb_rmst_metrics,
    _landmark_scalars,
    _rmst_scalars,
)
from .pte import LandmarkWorkspace
from .rmst import TimeGrid

STUDY_METRICS = ("pte", "pte_ind", "g2", "pte_rmst", "pte_rmst_ind")


@dataclass(frozen=True)
class SimSetting:
    """One benchmark configuration.

    ``setting`` picks the generative laws (1, 2, or 3); ``generator`` may
    replace them with a custom callable ``(m, rng) -> (s_treat, s_ctrl,
    t_treat, t_ctrl)``. ``cens_rate`` is the exponential censoring rate for
    both arms. ``cross_indexed`` switches to the alternate reading of the
    generator definitions in which each arm's primary time is driven by the
    other arm's surrogate; see the package notes on why the default is the
    own-arm reading.
    """

    setting: int = 1
    cens_rate: float = 0.12
    t: float = 5.0
    tau: float = 5.0
    cross_indexed: bool = False
    generator: object = None

    def __post_init__(self):
        if self.generator is None and self.setting not in (1, 2, 3):
            raise ValidationError(f"unknown setting id {self.setting!r}")
        if not self.cens_rate > 0:
            raise ValidationError("cens_rate must be positive")
        if not (0 < self.t and 0 < self.tau):
            raise ValidationError("t and tau must be positive")


@dataclass(frozen=True)
class PotentialOutcomeSample:
    """Both-world outcome draws for every subject, plus the assigned arm.

    Each subject carries surrogate, primary, and censoring times under
    treatment and under control; ``arm`` marks which world is observed.
    """

    surr_treat: np.ndarray
    surr_ctrl: np.ndarray
    prim_treat: np.ndarray
    prim_ctrl: np.ndarray
    cens_treat: np.ndarray
    cens_ctrl: np.ndarray
    arm: np.ndarray

    def __post_init__(self):
        n = self.arm.size
        for name in (
            "surr_treat",
            "surr_ctrl",
            "prim_treat",
            "prim_ctrl",
            "cens_treat",
            "cens_ctrl",
        ):
            a = getattr(self, name)
            if a.shape != (n,):
                raise ValidationError(f"{name} must have one entry per subject")
            if not np.all(np.isfinite(a)) or not np.all(a > 0):
                raise ValidationError(f"{name} must be positive and finite")
        counts = np.bincount(self.arm, minlength=2)
        if counts[0] != counts[1]:
            raise ValidationError(
                f"arm assignment must be balanced, got {counts[1]} treated "
                f"vs {counts[0]} control"
            )

    @property
    def n(self):
        return self.arm.size

    def observed(self):
        """Censored trial data for the assigned arms."""
        treated = self.arm == 1
        prim = np.where(treated, self.prim_treat, self.prim_ctrl)
        cens = np.where(treated, self.cens_treat, self.cens_ctrl)
        surr = np.where(treated, self.surr_treat, self.surr_ctrl)
        x = np.minimum(prim, cens)
        delta = (prim <= cens).astype(int)
        s_time = np.where(surr <= x, surr, np.nan)
        return TrialDataset.from_arrays(self.arm, x, delta, s_time)


def _draw_potential(setting, m, rng, cross_indexed=False, generator=None):
    """Surrogate and primary potential outcome times for ``m`` subjects.

    The printed definitions index each arm's primary time by the other
    arm's surrogate; the own-arm reading (default) pairs them instead,
    which is the reading consistent with the benchmark tables and the
    per-arm censoring fractions. ``cross_indexed=True`` keeps the printed
    pairing for sensitivity analysis.
    """
    if generator is not None:
        s_treat, s_ctrl, p_a, p_b = generator(m, rng)
    elif setting == 1:
        s_treat = 6.0 * rng.weibull(1.0, m)
        s_ctrl = 4.0 * rng.weibull(1.0, m)
        p_a = rng.exponential(1.0, m) * 5.0 * s_treat
        p_b = rng.exponential(1.0, m) * 3.0 * s_ctrl
    elif setting == 2:
        s_treat = rng.exponential(1 / 0.6, m)
        s_ctrl = rng.exponential(1 / 2.0, m)
        p_a = s_treat + rng.exponential(8.0, m) + np.exp(rng.normal(0.0, 0.1, m))
        p_b = s_ctrl + rng.exponential(4.0, m) + np.exp(rng.normal(0.0, 0.1, m))
    elif setting == 3:
        s_treat = rng.exponential(1 / 0.6, m)
        s_ctrl = rng.exponential(1 / 2.0, m)
        p_a = (
            s_treat
            - np.log(s_treat)
            + rng.exponential(4.0, m)
            + np.exp(rng.normal(0.0, 0.1, m))
        )
        p_b = (
            s_ctrl
            - np.log(s_ctrl)
            + rng.exponential(2.0, m)
            + np.exp(rng.normal(0.0, 0.1, m))
        )
    else:
        raise ValidationError(f"unknown setting id {setting!r}")
    if cross_indexed:
        return s_treat, s_ctrl, p_b, p_a
    return s_treat, s_ctrl, p_a, p_b


def _as_setting(setting):
    return setting if isinstance(setting, SimSetting) else SimSetting(setting=setting)


def generate_setting(setting, n, seed):
    """Draw a benchmark sample of ``n`` subjects, half per arm.

    ``setting`` is a setting id or a :class:`SimSetting`; ``seed`` may be
    an int, a SeedSequence, or a Generator. Returns the potential-outcome
    sample and the censored dataset observed from it. A subject's surrogate
    time enters the dataset only when it falls within the observed
    follow-up.
    """
    cfg = _as_setting(setting)
    if n % 2 != 0 or n < 4:
        raise ValidationError(f"n must be even and at least 4, got {n}")
    rng = np.random.default_rng(seed)
    s_treat, s_ctrl, p_treat, p_ctrl = _draw_potential(
        cfg.setting, n, rng, cfg.cross_indexed, cfg.generator
    )
    c_treat = rng.exponential(1 / cfg.cens_rate, n)
    c_ctrl = rng.exponential(1 / cfg.cens_rate, n)
    arm = np.tile(np.array([1, 0], dtype=np.int8), n // 2)
    sample = PotentialOutcomeSample(
        surr_treat=s_treat,
        surr_ctrl=s_ctrl,
        prim_treat=p_treat,
        prim_ctrl=p_ctrl,
        cens_treat=c_treat,
        cens_ctrl=c_ctrl,
        arm=arm,
    )
    return sample, sample.observed()


@dataclass(frozen=True)
class OracleTruth:
    """Population values of every estimand for one setting and landmark."""

    pte: float
    pte_ind: float
    g2: float
    lam: float
    pte_rmst: float
    pte_rmst_ind: float
    delta: float
    delta_rst: float
    swapped: bool

    def metric(self, name):
        values = {
            "pte": self.pte,
            "pte_ind": self.pte_ind,
            "g2": self.g2,
            "pte_rmst": self.pte_rmst,
            "pte_rmst_ind": self.pte_rmst_ind,
            "delta": self.delta,
        }
        if name not in values:
            raise ValidationError(f"no oracle truth for metric {name!r}")
        return values[name]


def _tail_prob(sorted_times, thresholds):
    """P(T > u) for each u from one pre-sorted sample."""
    thresholds = np.atleast_1d(thresholds)
    idx = np.searchsorted(sorted_times, thresholds, side="right")
    return (sorted_times.size - idx) / sorted_times.size


def oracle_truth(
    setting,
    t,
    t0,
    m=2_000_000,
    seed=0,
    n_bins=2000,
    rmst_nodes=100,
):
    """Brute-force population truths from ``m`` uncensored outcome draws.

    Densities of surrogate times among landmark survivors are estimated by
    fine histograms, so the truth computation shares no smoothing machinery
    with the estimator. The direct value of the explained effect is
    cross-checked against the closed-form identity linking it to the
    calibration multiplier; disagreement beyond 1e-3 raises. Restricted-mean
    truths integrate over a fine horizon grid with ``tau = t``.
    """
    cfg = _as_setting(setting)
    if m < 10**6:
        raise ValidationError("oracle needs at least 1e6 draws")
    t, t0 = float(t), float(t0)
    if not 0 < t0 <= t:
        raise ValidationError(f"need 0 < t0 <= t, got t0={t0!r}, t={t!r}")
    rng = np.random.default_rng(seed)
    s1, s0, p1, p0 = _draw_potential(
        cfg.setting, m, rng, cfg.cross_indexed, cfg.generator
    )

    swapped = False
    if np.mean(p1 > t) - np.mean(p0 > t) < 0:
        s1, s0, p1, p0 = s0, s1, p0, p1
        swapped = True

    p1_sorted = np.sort(p1)
    p0_sorted = np.sort(p0)

    def mu1(u):
        return float(_tail_prob(p1_sorted, u)[0])

    def mu0(u):
        return float(_tail_prob(p0_sorted, u)[0])

    delta = mu1(t) - mu0(t)

    edges = np.linspace(0.0, t0, n_bins + 1)
    ds = t0 / n_bins

    nodes = np.linspace(0.0, t, rmst_nodes + 1)
    near = np.isclose(nodes, t0, rtol=0.0, atol=1e-9 * t)
    nodes = np.where(near, t0, nodes)
    if t0 not in nodes:
        nodes = np.sort(np.append(nodes, t0))
    upper = nodes[nodes >= t0]

    # Joint subdensities f(s, u, t0) = d/ds P(S <= s, S <= t0, T > u) for
    # every horizon u at once: bin (S, T) and tail-sum over the T axis.
    in1 = s1 <= t0
    in0 = s0 <= t0
    t_edges = np.append(upper, np.inf)
    hist1 = np.histogram2d(s1[in1], p1[in1], bins=[edges, t_edges])[0]
    tail1 = np.cumsum(hist1[:, ::-1], axis=1)[:, ::-1] / (m * ds)
    f0_t0 = np.histogram(s0[in0 & (p0 > t0)], bins=edges)[0] / (m * ds)
    f1_t0 = tail1[:, 0]
    f1_t = tail1[:, -1]

    p1_out_sorted = np.sort(p1[~in1])

    def p1_tail(u):
        hit = np.searchsorted(p1_out_sorted, u, side="right")
        return (p1_out_sorted.size - hit) / m

    tail0_t0 = float(np.mean((p0 > t0) & ~in0))
    tail1_t0 = float(p1_tail(t0))
    tail1_t = float(p1_tail(t))

    keep = f1_t0 > 0
    i_den = float(np.sum(f0_t0[keep] ** 2 / f1_t0[keep])) * ds + tail0_t0**2 / tail1_t0
    i_num_t = float(np.sum(f0_t0[keep] * f1_t[keep] / f1_t0[keep])) * ds
    lam = (mu0(t) - i_num_t - tail0_t0 * tail1_t / tail1_t0) / i_den
    g1 = (lam * f0_t0[keep] + f1_t[keep]) / f1_t0[keep]
    g2 = (lam * tail0_t0 + tail1_t) / tail1_t0

    mean_g1 = float(np.sum(g1 * f1_t0[keep])) * ds + g2 * tail1_t0
    mean_g0 = float(np.sum(g1 * f0_t0[keep])) * ds + g2 * tail0_t0
    delta_g = mean_g1 - mean_g0
    pte = delta_g / delta

    p0_past_t0 = mu0(t0)
    pte_identity = 1 + lam * p0_past_t0 / delta
    if abs(pte - pte_identity) > 1e-3:
        raise InternalConsistencyError(
            f"direct explained-effect value {pte:.6f} disagrees with the "
            f"multiplier identity {pte_identity:.6f}"
        )

    g2_ind = mu0(t) / p0_past_t0
    pte_ind = g2_ind * (mu1(t0) - p0_past_t0) / delta

    # Restricted-mean truths on the horizon grid.
    deltas = _tail_prob(p1_sorted, nodes) - _tail_prob(p0_sorted, nodes)
    deltas[0] = 0.0
    delta_rst = float(np.trapezoid(deltas, nodes))
    lower_mask = nodes <= t0
    piece_before = float(np.trapezoid(deltas[lower_mask], nodes[lower_mask]))

    i_num_u = np.sum(
        f0_t0[keep, None] * tail1[keep, :] / f1_t0[keep, None], axis=0
    ) * ds
    mu0_u = _tail_prob(p0_sorted, upper)
    mu1_u = _tail_prob(p1_sorted, upper)
    tail1_u = p1_tail(upper)
    lam_u = (mu0_u - i_num_u - tail0_t0 * tail1_u / tail1_t0) / i_den
    delta_g_u = (mu1_u - mu0_u) + lam_u * p0_past_t0
    piece_after = float(np.trapezoid(delta_g_u, upper))
    pte_rmst = (piece_before + piece_after) / delta_rst

    delta_g_ind_u = (mu0_u / p0_past_t0) * (mu1(t0) - p0_past_t0)
    piece_after_ind = float(np.trapezoid(delta_g_ind_u, upper))
    pte_rmst_ind = (piece_before + piece_after_ind) / delta_rst

    return OracleTruth(
        pte=pte,
        pte_ind=pte_ind,
        g2=g2,
        lam=lam,
        pte_rmst=pte_rmst,
        pte_rmst_ind=pte_rmst_ind,
        delta=delta,
        delta_rst=delta_rst,
        swapped=swapped,
    )


@dataclass(frozen=True)
class ConditionReport:
    """Monte Carlo check of the four ordering conditions that place the
    population PTE in (0, 1).

    Each entry is ``(holds, margin)`` where the margin is the worst
    (smallest) difference of the compared probability-scale quantities over
    the grid used; a condition holds when its margin is strictly positive.
    """

    c1: tuple
    c2: tuple
    c3: tuple
    c4: tuple
    s_grid: np.ndarray = field(repr=False)
    u_grid: np.ndarray = field(repr=False)

    @property
    def all_hold(self):
        return all(flag for flag, _ in (self.c1, self.c2, self.c3, self.c4))


def check_conditions(sample, t, t0, n_bins=None, min_bin_count=None, u_points=99):
    """Evaluate the ordering conditions on an uncensored potential-outcome sample.

    C1 compares, between arms, survival past ``t`` conditional on the
    surrogate time among landmark survivors, on surrogate bins where both
    arms have at least ``min_bin_count`` landmark survivors (conditional
    probabilities are not estimable below that). C2 compares survival past
    ``t`` among landmark survivors without a surrogate by ``t0``. C3
    compares the joint tails of the transformed surrogate score, on a grid
    of its quantiles. C4 compares the landmark event-free joint tails.

    When ``n_bins`` or ``min_bin_count`` is None it is scaled to the sample
    size, reaching 200 bins with a floor of 50 subjects per bin on samples
    of a million draws per arm.
    """
    t, t0 = float(t), float(t0)
    s1, p1 = sample.surr_treat, sample.prim_treat
    s0, p0 = sample.surr_ctrl, sample.prim_ctrl
    m = sample.n
    if n_bins is None:
        n_bins = int(np.clip(m // 5000, 10, 200))
    if min_bin_count is None:
        min_bin_count = int(np.clip(m // 20_000, 5, 50))

    in1 = s1 <= t0
    in0 = s0 <= t0
    for label, mask, prim in (("treated", in1, p1), ("control", in0, p0)):
        if not np.any(mask & (prim > t0)):
            raise EmptyStratumError(
                f"{label} arm has no landmark survivors with a surrogate "
                "by the landmark",
                counts={label: 0},
            )

    edges = np.linspace(0.0, t0, n_bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])

    def bin_tails(s, p, mask, thr):
        return np.histogram(s[mask & (p > thr)], bins=edges)[0]

    n1_t0 = bin_tails(s1, p1, in1, t0)
    n0_t0 = bin_tails(s0, p0, in0, t0)
    n1_t = bin_tails(s1, p1, in1, t)
    n0_t = bin_tails(s0, p0, in0, t)
    retained = (n1_t0 >= min_bin_count) & (n0_t0 >= min_bin_count)
    if not retained.any():
        raise EmptyStratumError(
            "no surrogate bins with enough landmark survivors in both arms",
            counts={"retained_bins": 0},
        )
    m1 = n1_t[retained] / n1_t0[retained]
    m0 = n0_t[retained] / n0_t0[retained]
    c1_margin = float(np.min(m1 - m0))

    out1 = ~in1
    out0 = ~in0
    den1 = np.sum(out1 & (p1 > t0))
    den0 = np.sum(out0 & (p0 > t0))
    if den1 == 0 or den0 == 0:
        raise EmptyStratumError(
            "an arm has no landmark survivors without a surrogate by the landmark",
            counts={"treated": int(den1), "control": int(den0)},
        )
    big_m1 = np.sum(out1 & (p1 > t)) / den1
    big_m0 = np.sum(out0 & (p0 > t)) / den0
    c2_margin = float(big_m1 - big_m0)

    # The transformed-score condition uses the oracle transform of the
    # surrogate time, evaluated per bin on the same histogram estimates.
    dense = n1_t0 > 0
    lam_den = (
        float(np.sum(n0_t0[dense] ** 2 / n1_t0[dense])) / m
        + np.sum(out0 & (p0 > t0)) ** 2 / np.sum(out1 & (p1 > t0)) / m
    )
    lam_num = (
        np.mean(p0 > t)
        - float(np.sum(n0_t0[dense] * n1_t[dense] / n1_t0[dense])) / m
        - np.sum(out0 & (p0 > t0)) * np.sum(out1 & (p1 > t)) / np.sum(out1 & (p1 > t0)) / m
    )
    lam = lam_num / lam_den
    score_bins = np.full(n_bins, np.nan)
    score_bins[dense] = (lam * n0_t0[dense] + n1_t[dense]) / n1_t0[dense]

    def scores(s, p, mask):
        contrib = mask & (p > t0)
        idx = np.clip(np.searchsorted(edges, s[contrib], side="right") - 1, 0, n_bins - 1)
        vals = score_bins[idx]
        return vals[np.isfinite(vals)]

    u1 = np.sort(scores(s1, p1, in1))
    u0 = np.sort(scores(s0, p0, in0))
    pooled = np.concatenate([u1, u0])
    u_grid = np.unique(np.percentile(pooled, np.linspace(1, 99, u_points)))
    tails1 = (u1.size - np.searchsorted(u1, u_grid, side="right")) / m
    tails0 = (u0.size - np.searchsorted(u0, u_grid, side="right")) / m
    c3_margin = float(np.min(tails1 - tails0))

    c4_margin = float(np.sum(out1 & (p1 > t0)) / m - np.sum(out0 & (p0 > t0)) / m)

    report = ConditionReport(
        c1=(c1_margin > 0, c1_margin),
        c2=(c2_margin > 0, c2_margin),
        c3=(c3_margin > 0, c3_margin),
        c4=(c4_margin > 0, c4_margin),
        s_grid=centers[retained],
        u_grid=u_grid,
    )
    return report


@dataclass(frozen=True)
class StudyRow:
    """One metric's summary for one setting and landmark."""

    setting: int
    t0: float
    metric: str
    truth: float
    est: float
    bias: float
    ese: float
    ase: float
    cp: float
    failures: int
    reps: int
    flagged: bool


STUDY_COLUMNS = (
    "setting",
    "t0",
    "metric",
    "truth",
    "est",
    "bias",
    "ese",
    "ase",
    "cp",
    "failures",
    "reps",
    "flagged",
)

STUDY_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class StudyTable:
    """Collected simulation-study rows with stable serialization."""

    rows: tuple

    def to_csv(self, path=None):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(STUDY_COLUMNS)
        for row in self.rows:
            writer.writerow([repr(getattr(row, c)) if isinstance(getattr(row, c), float)
                             else getattr(row, c) for c in STUDY_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_json(self, path=None):
        def cell(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        payload = {
            "schema_version": STUDY_SCHEMA_VERSION,
            "columns": list(STUDY_COLUMNS),
            "rows": [
                {c: cell(getattr(row, c)) for c in STUDY_COLUMNS}
                for row in self.rows
            ],
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def row(self, setting, t0, metric):
        for r in self.rows:
            if r.setting == setting and r.t0 == t0 and r.metric == metric:
                return r
        raise KeyError((setting, t0, metric))


def _study_replicate(args):
    """Worker for one simulated dataset: per-metric (est, se, lo, hi)."""
    (
        cfg,
        n,
        t0,
        b,
        metrics,
        perturb_rmst,
        options,
        data_seed,
        perturb_seed,
    ) = args
    out = {m: (math.nan, math.nan, math.nan, math.nan) for m in metrics}
    try:
        _, data = generate_setting(cfg, n, data_seed)
        ws = LandmarkWorkspace(data, t0, options)
    except EstimationError:
        return out
    landmark = tuple(m for m in metrics if m in ("pte", "pte_ind", "g2", "delta"))
    rmst = tuple(m for m in metrics if m in ("pte_rmst", "pte_rmst_ind"))
    if landmark:
        try:
            if b > 0:
                cfg_b = PerturbationConfig(replicates=b, seed=perturb_seed)
                ivals = perturb_landmark_metrics(ws, cfg.t, cfg_b, landmark)
                for name, iv in ivals.items():
                    if iv.reliable:
                        out[name] = (iv.point, iv.se, iv.ci95[0], iv.ci95[1])
            else:
                vals = _landmark_scalars(ws, cfg.t, None, landmark)
                for name, val in vals.items():
                    out[name] = (val, math.nan, math.nan, math.nan)
        except EstimationError:
            pass
    if rmst:
        grid = TimeGrid.build(ws.t0, cfg.tau)
        try:
            if perturb_rmst and b > 0:
                cfg_b = PerturbationConfig(replicates=b, seed=perturb_seed)
                ivals = perturb_rmst_metrics(ws, cfg.tau, cfg_b, rmst, grid=grid)
                for name, iv in ivals.items():
                    if iv.reliable:
                        out[name] = (iv.point, iv.se, iv.ci95[0], iv.ci95[1])
            else:
                vals = _rmst_scalars(ws, grid, None, rmst)
                for name, val in vals.items():
                    out[name] = (val, math.nan, math.nan, math.nan)
        except EstimationError:
            pass
    return out


def run_study(
    settings=(1, 2, 3),
    t0_values=(1.0, 2.0, 3.0),
    reps=500,
    n=2000,
    b=500,
    seed=0,
    options=None,
    metrics=STUDY_METRICS,
    perturb_rmst=False,
    oracle_m=1_000_000,
    truths=None,
    threads=1,
):
    """Monte Carlo study table across settings and landmarks.

    Per replicate: generate data, estimate every requested metric, and (for
    the fixed-horizon metrics, with ``b > 0``) resample for SEs and CIs.
    Rows aggregate the mean estimate, bias against the truth, empirical SE,
    average resampled SE, and CI coverage of the truth. Truths default to
    the mega-sample oracle; pass ``truths`` as ``{(setting, t0): {metric:
    value}}`` to override. Failures are counted per row, and a row is
    flagged when more than 5% of its replicates failed. Fully deterministic
    for a given seed, including under ``threads > 1``.
    """
    if reps < 2:
        raise ValidationError("reps must be at least 2")
    cfgs = [_as_setting(s) for s in settings]
    cells = [(cfg, float(t0)) for cfg in cfgs for t0 in t0_values]
    root = np.random.SeedSequence(seed)
    cell_seeds = root.spawn(2 * len(cells))

    rows = []
    for idx, (cfg, t0) in enumerate(cells):
        truth_map = {}
        if truths is not None and (cfg.setting, t0) in truths:
            truth_map = dict(truths[(cfg.setting, t0)])
        else:
            oracle = oracle_truth(
                cfg, cfg.t, t0, m=max(oracle_m, 10**6), seed=cell_seeds[2 * idx + 1]
            )
            truth_map = {m: oracle.metric(m) for m in metrics}

        rep_seeds = cell_seeds[2 * idx].spawn(reps)
        payloads = []
        for r in range(reps):
            data_seed, perturb_seed = rep_seeds[r].spawn(2)
            payloads.append(
                (cfg, n, t0, b, tuple(metrics), perturb_rmst, options, data_seed, perturb_seed)
            )
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_study_replicate, payloads, chunksize=4))
        else:
            results = [_study_replicate(p) for p in payloads]

        for metric in metrics:
            est = np.array([res[metric][0] for res in results])
            se = np.array([res[metric][1] for res in results])
            lo = np.array([res[metric][2] for res in results])
            hi = np.array([res[metric][3] for res in results])
            ok = np.isfinite(est)
            failures = int((~ok).sum())
            truth = float(truth_map.get(metric, math.nan))
            mean_est = float(np.mean(est[ok])) if ok.any() else math.nan
            ese = float(np.std(est[ok], ddof=1)) if ok.sum() > 1 else math.nan
            with_se = ok & np.isfinite(se)
            ase = float(np.mean(se[with_se])) if with_se.any() else math.nan
            if with_se.any() and np.isfinite(truth):
                cp = float(np.mean((lo[with_se] <= truth) & (truth <= hi[with_se])))
            else:
                cp = math.nan
            rows.append(
                StudyRow(
                    setting=cfg.setting,
                    t0=t0,
                    metric=metric,
                    truth=truth,
                    est=mean_est,
                    bias=mean_est - truth,
                    ese=ese,
                    ase=ase,
                    cp=cp,
                    failures=failures,
                    reps=reps,
                    flagged=failures > 0.05 * reps,
                )
            )
    return StudyTable(rows=tuple(rows))
