import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surropt import (
    AnalysisOptions,
    LandmarkWorkspace,
    PositivityError,
    TrialDataset,
    censoring_km,
    ipcw_weights,
    km_with_ci,
)
from surropt.survival import ipcw_values, weighted_joint_tail, weighted_survival


def dataset_with_arm(arm_x, arm_delta, target_arm=1):
    """One arm as given, the other arm a single event far in the future."""
    other = 1 - target_arm
    x = list(arm_x) + [100.0]
    delta = list(arm_delta) + [1]
    arm = [target_arm] * len(arm_x) + [other]
    s = [np.nan] * len(x)
    return TrialDataset.from_arrays(arm, x, delta, s)


class TestCensoringKm:
    def test_hand_case(self):
        # censored at 1 and 3, primary event at 2:
        # G drops to 2/3 at 1, stays through 2, drops to 0 at 3
        data = dataset_with_arm([1.0, 2.0, 3.0], [0, 1, 0])
        curve = censoring_km(data, 1)
        got = curve.evaluate(np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0]))
        np.testing.assert_allclose(got, [1.0, 2 / 3, 2 / 3, 2 / 3, 2 / 3, 0.0])

    def test_tie_shares_risk_set(self):
        # censor and event tied at 2: both are at risk there, one censoring
        data = dataset_with_arm([2.0, 2.0, 5.0], [0, 1, 1])
        curve = censoring_km(data, 1)
        assert curve.evaluate(np.array([2.0]))[0] == pytest.approx(2 / 3)

    def test_matches_exponential_tail(self):
        rng = np.random.default_rng(5)
        n = 40_000
        t_true = rng.exponential(6.0, n)
        c_true = rng.exponential(1 / 0.12, n)
        x = np.minimum(t_true, c_true)
        delta = (t_true <= c_true).astype(int)
        data = dataset_with_arm(x, delta)
        curve = censoring_km(data, 1)
        for t in (1.0, 2.0, 4.0):
            assert curve.evaluate(np.array([t]))[0] == pytest.approx(
                np.exp(-0.12 * t), abs=0.01
            )

    def test_perturb_ones_matches_unweighted(self):
        data = dataset_with_arm([1.0, 2.0, 3.0, 4.0], [0, 1, 0, 1])
        base = censoring_km(data, 1)
        ones = censoring_km(data, 1, perturb=np.ones(data.n))
        grid = np.array([0.5, 1.5, 2.5, 3.5, 4.5])
        np.testing.assert_array_equal(base.evaluate(grid), ones.evaluate(grid))


class TestIpcwWeights:
    def test_hand_case(self):
        # censoring at 4 puts G(5) at 1/2, so the subject observed past
        # t = 5 carries weight 2; the subject censored before t carries 0
        data = dataset_with_arm([4.0, 7.0], [0, 0])
        curves = {a: censoring_km(data, a) for a in (0, 1)}
        w = ipcw_weights(data, 5.0, curves).values
        assert w[0] == 0.0
        assert w[1] == pytest.approx(2.0)

    def test_event_by_t_weighted_at_event_time(self):
        # event at 2 with G(2) = 1/2 after the censoring at 1
        data = dataset_with_arm([1.0, 2.0], [0, 1])
        curves = {a: censoring_km(data, a) for a in (0, 1)}
        w = ipcw_weights(data, 5.0, curves).values
        assert w[1] == pytest.approx(2.0)

    def test_positivity_failure_names_subject(self):
        # a subject under observation past t while the censoring survival
        # at t has vanished cannot be weighted
        x = np.array([7.0, 1.0])
        delta = np.array([0, 0])
        g_at_xt = np.array([0.0, 0.9])
        with pytest.raises(PositivityError, match="'p7'"):
            ipcw_values(x, delta, 5.0, g_at_xt, subject_ids=["p7", "p1"])

    def test_survival_matches_uncensored_oracle(self, bench):
        # IPCW-weighted survival vs. the event-free fraction of the same
        # draws before censoring is applied
        sample, data = bench(1, 200_000, 31)
        truth = float(np.mean(sample.prim_ctrl > 5.0))
        ws = LandmarkWorkspace(data, 2.0, AnalysisOptions())
        mu = ws.marginals(5.0, ws.weights_at(5.0))
        assert mu[0] == pytest.approx(truth, abs=0.01)

    def test_joint_tail_zero_when_all_surrogates_early(self):
        data = TrialDataset.from_arrays(
            arm=[1, 1, 0, 0],
            x=[5.0, 6.0, 5.5, 7.0],
            delta=[1, 1, 1, 1],
            s_time=[0.5, 0.8, 0.4, 0.9],
        )
        curves = {a: censoring_km(data, a) for a in (0, 1)}
        w = ipcw_weights(data, 2.0, curves)
        assert weighted_joint_tail(data, 1, 2.0, 1.0, w) == 0.0
        assert weighted_survival(data, 1, 2.0, w) == 1.0


class TestKmWithCi:
    def test_anchor_and_bounds(self):
        x = np.array([1.0, 2.0, 2.0, 3.0, 4.0])
        event = np.array([1, 1, 0, 1, 0])
        t, s, lo, hi = km_with_ci(x, event)
        assert t[0] == 0.0 and s[0] == 1.0 and lo[0] == 1.0 and hi[0] == 1.0
        assert np.all((0 <= lo) & (lo <= s) & (s <= hi) & (hi <= 1))

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.floats(0.01, 50.0, allow_nan=False),
                st.integers(0, 1),
            ),
            min_size=1,
            max_size=40,
        )
    )
    def test_curve_is_monotone_in_unit_interval(self, rows):
        x = np.array([r[0] for r in rows])
        event = np.array([r[1] for r in rows])
        t, s, lo, hi = km_with_ci(x, event)
        assert np.all(np.diff(t) > 0)
        assert np.all(np.diff(s) <= 1e-15)
        assert np.all((s >= 0) & (s <= 1))
        assert np.all((lo <= s + 1e-15) & (s <= hi + 1e-15))
