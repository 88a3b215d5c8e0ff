"""PTE variants on the restricted-mean-survival-time scale.

Instead of fixing one horizon ``t``, the treatment effect is the area
between the survival curves up to ``tau``: the gain in expected lifetime
truncated at ``tau``. The explained portion integrates, over horizons past
the landmark, the effect on a transform refit at every horizon; the part of
the area before the landmark is attributed to the surrogate in full, since
surrogate information at ``t0`` determines survival up to ``t0`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, IllDefinedPTEError, NodeFitError, ValidationError
from .pte import AnalysisOptions, LandmarkWorkspace, PteResult, _check_times


@dataclass(frozen=True)
class TimeGrid:
    """Integration nodes 0 = u_0 < ... < u_M = tau with ``t0`` among them."""

    t0: float
    tau: float
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValidationError("TimeGrid needs at least two nodes")
        if not np.all(np.diff(nodes) > 0):
            raise ValidationError("TimeGrid nodes must be strictly increasing")
        if nodes[0] != 0.0 or nodes[-1] != self.tau:
            raise ValidationError("TimeGrid must span [0, tau] exactly")
        if self.t0 not in nodes:
            raise ValidationError("TimeGrid must contain t0 as a node")

    @classmethod
    def build(cls, t0, tau, dt=None):
        """Uniform nodes with target spacing ``dt`` (default tau/20), t0 inserted."""
        _check_times(tau, t0)
        if dt is None:
            dt = 0.05 * tau
        if not 0 < dt <= tau:
            raise ValidationError(f"node spacing must be in (0, tau], got {dt!r}")
        m = max(1, round(tau / dt))
        nodes = np.linspace(0.0, tau, m + 1)
        near = np.isclose(nodes, t0, rtol=0.0, atol=1e-9 * tau)
        if near.any():
            nodes[near] = t0
        else:
            nodes = np.sort(np.append(nodes, t0))
        return cls(t0=float(t0), tau=float(tau), nodes=nodes)

    def upper(self):
        """Nodes from t0 to tau inclusive (the transform-fitting range)."""
        return self.nodes[self.nodes >= self.t0]


def node_weights(ws, grid, v=None):
    """Effective weight vectors for every positive node, keyed by node time."""
    return {float(u): ws.weights_at(float(u), v) for u in grid.nodes if u > 0}


def _effect_curve(ws, grid, weights, treat):
    """Survival difference (treated minus control) at each grid node."""
    ctrl = 1 - treat
    deltas = np.empty(grid.nodes.size)
    deltas[0] = 0.0
    for i, u in enumerate(grid.nodes[1:], start=1):
        mu = ws.marginals(float(u), weights[float(u)])
        deltas[i] = mu[treat] - mu[ctrl]
    return deltas


def _rmst_pieces(ws, grid, treat, weights, ind):
    """Both integrals of the restricted-mean construction, plus diagnostics.

    Returns (delta_rst, piece_before, piece_after, node_multipliers) where
    ``delta_rst`` integrates the survival difference over [0, tau],
    ``piece_before`` the same over [0, t0], and ``piece_after`` integrates
    the transformed-score effect over [t0, tau] with a transform refit at
    each node.
    """
    nodes = grid.nodes
    deltas = _effect_curve(ws, grid, weights, treat)
    delta_rst = float(np.trapezoid(deltas, nodes))

    lower = nodes <= grid.t0
    piece_before = float(np.trapezoid(deltas[lower], nodes[lower]))

    upper = grid.upper()
    if upper.size < 2:
        return delta_rst, piece_before, 0.0, ()

    w_t0 = weights[float(grid.t0)]
    fit_one = ws.ind_fit if ind else ws.fit
    delta_g = np.empty(upper.size)
    multipliers = []
    for i, u in enumerate(upper):
        u = float(u)
        try:
            fit = fit_one(u, treat=treat, w_t0=w_t0, w_t=weights[u])
        except EstimationError as exc:
            raise NodeFitError(
                f"transform fit failed at node t={u:g}: {exc}", node=u
            ) from exc
        delta_g[i] = fit["delta_g"]
        multipliers.append(fit["lam"])
    piece_after = float(np.trapezoid(delta_g, upper))
    return delta_rst, piece_before, piece_after, tuple(multipliers)


def _estimate_rmst(data, t0, tau, options, workspace, grid, ind, variant):
    _check_times(tau, t0)
    ws = workspace or LandmarkWorkspace(data, t0, options)
    grid = grid or TimeGrid.build(ws.t0, float(tau))
    if grid.t0 != ws.t0 or grid.tau != float(tau):
        raise ValidationError("TimeGrid does not match the requested t0 and tau")
    weights = node_weights(ws, grid)
    thresh = ws.opts.min_delta * grid.tau

    deltas1 = _effect_curve(ws, grid, weights, 1)
    d1 = float(np.trapezoid(deltas1, grid.nodes))
    treat = 0 if d1 < -thresh else 1
    if abs(d1) <= thresh:
        raise IllDefinedPTEError(
            f"restricted-mean treatment effect {d1:.2e} is too small for a "
            f"PTE ratio (threshold {thresh:g})"
        )

    if grid.t0 == grid.tau:
        # The whole area lies before the landmark, where the surrogate
        # explains the effect by construction: the ratio is exactly 1 and
        # no transform fits are needed.
        delta_rst = d1 if treat == 1 else -d1
        return PteResult(
            variant=variant,
            t0=ws.t0,
            tau=grid.tau,
            delta=delta_rst,
            delta_g=delta_rst,
            pte=1.0,
            diagnostics={"labels_swapped": treat == 0, "nodes": grid.nodes.size},
        )

    delta_rst, before, after, mults = _rmst_pieces(ws, grid, treat, weights, ind)
    delta_g_rst = before + after
    return PteResult(
        variant=variant,
        t0=ws.t0,
        tau=grid.tau,
        delta=delta_rst,
        delta_g=delta_g_rst,
        pte=delta_g_rst / delta_rst,
        diagnostics={
            "labels_swapped": treat == 0,
            "nodes": grid.nodes.size,
            "piece_before_landmark": before,
            "piece_after_landmark": after,
            "node_multipliers": mults,
        },
    )


def estimate_pte_rmst(data, t0, tau, options=None, *, workspace=None, grid=None):
    """PTE on the restricted-mean scale with the full surrogate transform.

    The denominator is the integrated survival difference over [0, tau];
    the numerator integrates the transformed-score effect, refitting the
    transform at every node past the landmark. A failed fit at any node
    raises :class:`NodeFitError` naming the node.
    """
    return _estimate_rmst(
        data, t0, tau, options, workspace, grid, ind=False, variant="pte_rmst"
    )


def estimate_pte_rmst_ind(data, t0, tau, options=None, *, workspace=None, grid=None):
    """Restricted-mean PTE using only the landmark survival indicator."""
    return _estimate_rmst(
        data, t0, tau, options, workspace, grid, ind=True, variant="pte_rmst_ind"
    )
