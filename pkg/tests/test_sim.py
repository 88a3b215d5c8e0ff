import csv
import io
import json
import math

import numpy as np
import pytest

from surropt import (
    AnalysisOptions,
    EmptyStratumError,
    SimSetting,
    ValidationError,
    check_conditions,
    generate_setting,
    oracle_truth,
    run_study,
)
from surropt.sim import STUDY_COLUMNS, PotentialOutcomeSample

T, TAU = 5.0, 5.0

# Population values from an independent brute-force computation, frozen
# before this module existed (two million uncensored draws per arm).
FROZEN = {
    (1, 2.0): {"pte": 0.5614, "g2": 0.7973, "pte_ind": 0.5108, "lam": -0.1253},
    (2, 1.0): {"pte": 0.6159, "g2": 0.7952, "pte_ind": 0.0010},
    (3, 3.0): {"pte": 0.6075, "g2": 0.7750, "pte_ind": 0.1696},
}


def balanced_arm(m):
    return np.tile(np.array([1, 0], dtype=np.int8), m // 2)


def sample_from(s_treat, s_ctrl, p_treat, p_ctrl, c):
    return PotentialOutcomeSample(
        surr_treat=s_treat,
        surr_ctrl=s_ctrl,
        prim_treat=p_treat,
        prim_ctrl=p_ctrl,
        cens_treat=c,
        cens_ctrl=c,
        arm=balanced_arm(s_treat.size),
    )


class TestSimSetting:
    def test_rejects_unknown_setting(self):
        with pytest.raises(ValidationError):
            SimSetting(setting=4)

    def test_rejects_bad_rates_and_times(self):
        with pytest.raises(ValidationError):
            SimSetting(cens_rate=0.0)
        with pytest.raises(ValidationError):
            SimSetting(t=-1.0)


class TestGenerators:
    """Four-sigma checks of the generative means against closed forms."""

    @staticmethod
    def close(values, expected):
        se = values.std(ddof=1) / math.sqrt(values.size)
        assert abs(values.mean() - expected) < 4 * se, (
            f"mean {values.mean():.4f} vs expected {expected:.4f}"
        )

    def test_scaled_weibull_pair(self):
        sample, _ = generate_setting(1, 200_000, seed=3)
        self.close(sample.surr_treat, 6.0)
        self.close(sample.surr_ctrl, 4.0)
        self.close(sample.prim_treat, 30.0)
        self.close(sample.prim_ctrl, 12.0)
        self.close(sample.cens_treat, 1 / 0.12)

    def test_shifted_exponential_pair(self):
        sample, _ = generate_setting(2, 200_000, seed=3)
        lognormal_mean = math.exp(0.005)
        self.close(sample.surr_treat, 1 / 0.6)
        self.close(sample.surr_ctrl, 0.5)
        self.close(sample.prim_treat, 1 / 0.6 + 8.0 + lognormal_mean)
        self.close(sample.prim_ctrl, 0.5 + 4.0 + lognormal_mean)

    def test_nonmonotone_link_pair(self):
        # E[S - log S] for an exponential with rate r is 1/r + gamma + log r
        sample, _ = generate_setting(3, 200_000, seed=3)
        g = np.euler_gamma
        lognormal_mean = math.exp(0.005)
        self.close(
            sample.prim_treat, 1 / 0.6 + g + math.log(0.6) + 4.0 + lognormal_mean
        )
        self.close(sample.prim_ctrl, 0.5 + g + math.log(2.0) + 2.0 + lognormal_mean)

    def test_cross_indexed_swaps_primary_arrays(self):
        own, _ = generate_setting(SimSetting(setting=1), 1000, seed=6)
        crossed, _ = generate_setting(
            SimSetting(setting=1, cross_indexed=True), 1000, seed=6
        )
        np.testing.assert_array_equal(own.surr_treat, crossed.surr_treat)
        np.testing.assert_array_equal(own.prim_treat, crossed.prim_ctrl)
        np.testing.assert_array_equal(own.prim_ctrl, crossed.prim_treat)


class TestObserved:
    def test_censoring_and_surrogate_rules(self):
        sample, data = generate_setting(1, 2000, seed=4)
        treated = sample.arm == 1
        prim = np.where(treated, sample.prim_treat, sample.prim_ctrl)
        cens = np.where(treated, sample.cens_treat, sample.cens_ctrl)
        surr = np.where(treated, sample.surr_treat, sample.surr_ctrl)
        np.testing.assert_allclose(data.x, np.minimum(prim, cens))
        np.testing.assert_array_equal(data.delta, (prim <= cens).astype(int))
        np.testing.assert_array_equal(data.arm, sample.arm)
        hidden = np.isnan(data.s)
        np.testing.assert_array_equal(hidden, surr > data.x)
        np.testing.assert_allclose(data.s[~hidden], surr[~hidden])

    def test_arms_are_balanced(self):
        sample, data = generate_setting(2, 500_0, seed=4)
        assert data.n_by_arm[0] == data.n_by_arm[1] == 2500

    def test_odd_n_rejected(self):
        with pytest.raises(ValidationError):
            generate_setting(1, 5, seed=0)

    def test_unbalanced_assignment_rejected(self):
        ones = np.ones(4)
        with pytest.raises(ValidationError, match="balanced"):
            PotentialOutcomeSample(
                surr_treat=ones,
                surr_ctrl=ones,
                prim_treat=ones,
                prim_ctrl=ones,
                cens_treat=ones,
                cens_ctrl=ones,
                arm=np.array([1, 1, 1, 0], dtype=np.int8),
            )

    def test_nonpositive_times_rejected(self):
        ones = np.ones(4)
        bad = np.array([1.0, -2.0, 1.0, 1.0])
        with pytest.raises(ValidationError, match="prim_treat"):
            sample_from(ones, ones, bad, ones, ones)


class TestOracle:
    def test_same_seed_is_bit_stable(self):
        a = oracle_truth(1, T, 2.0, m=10**6, seed=4)
        b = oracle_truth(1, T, 2.0, m=10**6, seed=4)
        assert a == b

    def test_seed_changes_little(self):
        a = oracle_truth(1, T, 2.0, m=10**6, seed=4)
        b = oracle_truth(1, T, 2.0, m=10**6, seed=5)
        assert abs(a.pte - b.pte) < 0.02

    @pytest.mark.parametrize("setting,t0", [(1, 2.0), (2, 1.0), (3, 3.0)])
    def test_agrees_with_independent_computation(self, setting, t0):
        o = oracle_truth(setting, T, t0, m=10**6, seed=11)
        for name, frozen in FROZEN[(setting, t0)].items():
            got = getattr(o, name)
            assert got == pytest.approx(frozen, abs=0.02), name

    def test_restricted_mean_truths(self):
        o = oracle_truth(1, T, 2.0, m=10**6, seed=11)
        assert o.pte_rmst == pytest.approx(0.7844, abs=0.02)
        assert o.pte_rmst_ind == pytest.approx(0.7621, abs=0.02)
        early = oracle_truth(3, T, 1.0, m=10**6, seed=11)
        assert early.pte_rmst > 0.3

    def test_metric_accessor(self):
        o = oracle_truth(1, T, 2.0, m=10**6, seed=4)
        assert o.metric("pte") == o.pte
        assert o.metric("delta") == o.delta
        with pytest.raises(ValidationError):
            o.metric("lam")

    def test_worse_treatment_arm_is_swapped(self):
        def flipped(m, rng):
            s_treat = 4.0 * rng.weibull(1.0, m)
            s_ctrl = 6.0 * rng.weibull(1.0, m)
            p_a = rng.exponential(1.0, m) * 3.0 * s_treat
            p_b = rng.exponential(1.0, m) * 5.0 * s_ctrl
            return s_treat, s_ctrl, p_a, p_b

        o = oracle_truth(SimSetting(generator=flipped), T, 2.0, m=10**6, seed=9)
        assert o.swapped
        assert o.pte == pytest.approx(FROZEN[(1, 2.0)]["pte"], abs=0.03)
        assert oracle_truth(1, T, 2.0, m=10**6, seed=9).swapped is False

    def test_reparameterizing_the_surrogate_scale_changes_nothing(self):
        # relabel surrogate times below the landmark by a strictly
        # increasing map fixing the landmark; population values are
        # invariant, so the mega-sample values should move only by noise
        t0 = 2.0

        def relabeled(m, rng):
            s_treat = 6.0 * rng.weibull(1.0, m)
            s_ctrl = 4.0 * rng.weibull(1.0, m)
            p_a = rng.exponential(1.0, m) * 5.0 * s_treat
            p_b = rng.exponential(1.0, m) * 3.0 * s_ctrl

            def phi(s):
                return np.where(s < t0, s**3 / t0**2, s)

            return phi(s_treat), phi(s_ctrl), p_a, p_b

        base = oracle_truth(1, T, t0, m=10**6, seed=777)
        rep = oracle_truth(SimSetting(generator=relabeled), T, t0, m=10**6, seed=777)
        assert abs(base.pte - rep.pte) < 0.01

    def test_validation(self):
        with pytest.raises(ValidationError):
            oracle_truth(1, T, 2.0, m=10**5)
        with pytest.raises(ValidationError):
            oracle_truth(1, T, 6.0)


class TestConditions:
    def test_dominance_sample_satisfies_all_four(self):
        # shared surrogate, treated primary twice the control primary:
        # conditional and marginal orderings all hold by construction
        rng = np.random.default_rng(33)
        m = 400_000
        s_shared = rng.exponential(2.0, m)
        base = rng.exponential(1.0, m) * (1 + s_shared)
        report = check_conditions(
            sample_from(s_shared, s_shared, 2 * base, base, rng.exponential(8.0, m)),
            t=T,
            t0=2.0,
        )
        assert report.all_hold
        for flag, margin in (report.c1, report.c2, report.c3, report.c4):
            assert flag and margin > 0

    def test_identical_arms_satisfy_none(self):
        rng = np.random.default_rng(8)
        m = 50_000
        s = rng.exponential(2.0, m)
        p = rng.exponential(4.0, m) * (1 + s)
        report = check_conditions(
            sample_from(s, s, p, p, rng.exponential(8.0, m)), t=T, t0=2.0
        )
        assert not report.all_hold
        for flag, margin in (report.c1, report.c2, report.c3, report.c4):
            assert flag is False
            assert margin == 0.0

    def test_first_benchmark_breaks_the_third_condition(self):
        # the scaled-Weibull benchmark violates the conditional-ordering
        # condition on survivor surrogates by a small but real margin
        sample, _ = generate_setting(1, 10**6, seed=5)
        report = check_conditions(sample, t=T, t0=2.0)
        flag, margin = report.c3
        assert flag is False
        assert margin < 0
        assert not report.all_hold

    def test_no_landmark_survivors_raises(self):
        rng = np.random.default_rng(2)
        m = 1000
        s = rng.uniform(0.05, 0.3, m)
        p = rng.uniform(0.1, 0.5, m)
        with pytest.raises(EmptyStratumError):
            check_conditions(
                sample_from(s, s, p, p, rng.exponential(8.0, m)), t=T, t0=2.0
            )


@pytest.fixture(scope="module")
def smoke():
    return run_study(
        settings=(1,),
        t0_values=(2.0,),
        reps=3,
        n=400,
        b=0,
        seed=99,
        metrics=("pte", "g2"),
        oracle_m=10**6,
    )


class TestStudy:
    def test_row_aggregation(self, smoke):
        assert len(smoke.rows) == 2
        row = smoke.row(1, 2.0, "pte")
        assert row.reps == 3 and row.failures == 0 and not row.flagged
        assert row.truth == pytest.approx(FROZEN[(1, 2.0)]["pte"], abs=0.03)
        assert np.isfinite(row.est) and np.isfinite(row.ese) and row.ese > 0
        assert row.bias == pytest.approx(row.est - row.truth, abs=1e-15)
        assert math.isnan(row.ase) and math.isnan(row.cp)
        with pytest.raises(KeyError):
            smoke.row(1, 2.0, "pte_rmst")

    def test_csv_round_trip(self, smoke):
        text = smoke.to_csv()
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == list(STUDY_COLUMNS)
        assert len(rows) == 3
        parsed = rows[1]
        row = smoke.rows[0]
        assert int(parsed[0]) == row.setting
        assert float(parsed[4]) == row.est
        assert parsed[2] == row.metric

    def test_json_round_trip(self, smoke, tmp_path):
        path = tmp_path / "table.json"
        text = smoke.to_json(path)
        assert path.read_text() == text
        payload = json.loads(text)
        assert payload["schema_version"] == 1
        assert payload["columns"] == list(STUDY_COLUMNS)
        assert len(payload["rows"]) == 2
        assert payload["rows"][0]["est"] == smoke.rows[0].est

    def test_truth_override_skips_the_oracle(self):
        table = run_study(
            settings=(1,),
            t0_values=(2.0,),
            reps=2,
            n=400,
            b=0,
            seed=3,
            metrics=("pte",),
            truths={(1, 2.0): {"pte": 0.5}},
        )
        assert table.rows[0].truth == 0.5

    def test_threads_do_not_change_the_table(self):
        kwargs = dict(
            settings=(1,),
            t0_values=(2.0,),
            reps=4,
            n=300,
            b=4,
            seed=7,
            metrics=("pte",),
            truths={(1, 2.0): {"pte": 0.5}},
        )
        serial = run_study(threads=1, **kwargs).to_csv()
        parallel = run_study(threads=2, **kwargs).to_csv()
        assert serial == parallel

    def test_every_replicate_failing_flags_the_row(self):
        table = run_study(
            settings=(1,),
            t0_values=(2.0,),
            reps=2,
            n=400,
            b=0,
            seed=3,
            metrics=("pte",),
            truths={(1, 2.0): {"pte": 0.5}},
            options=AnalysisOptions(min_delta=5.0),
        )
        row = table.rows[0]
        assert row.flagged and row.failures == 2
        assert math.isnan(row.est) and math.isnan(row.cp)

    def test_reps_validation(self):
        with pytest.raises(ValidationError):
            run_study(reps=1)
