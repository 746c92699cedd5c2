"""Property suites for every module's invariants, 1000 cases per property.

Point-form invariants (fixed-input limit checks) are asserted directly;
universally quantified ones run under hypothesis.
"""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pmcal.calibrate import ModelKind, fit
from pmcal.cleanse import CleanseConfig, RatioWindowState, Verdict, cleanse_series, cleanse_step
from pmcal.evaluate import RelErrorSet, bias_pep, comparability, relative_errors, sigma_ucl
from pmcal.optics import (
    AerosolAssumptions,
    BinCounts,
    OpticalGeometry,
    mie_intensity,
    opc_mass_concentration,
    pnm_sensitivity,
    wiscombe_terms,
)
from pmcal.statcore import chi2_quantile, pearson_r, sample_stats, t_quantile
from pmcal.synthgen import (
    DiurnalProfile,
    FogEvent,
    MeanRevertingLevel,
    SensorProfile,
    TruthScenario,
    generate_truth,
    simulate_sensor,
)
from pmcal.timeseries import (
    CollocatedPairs,
    IntervalMask,
    Sample,
    Series,
    align_collocated,
    apply_mask,
    average_interval,
    completeness,
    unitwise_average,
)

from oracles import rayleigh_intensity

CASES = settings(max_examples=1000, deadline=None, database=None, derandomize=True)

finite = st.floats(min_value=0.0, max_value=500.0, allow_nan=False)


@st.composite
def pm25_series(draw, min_len=1, max_len=24, interval=None):
    values = draw(st.lists(finite, min_size=min_len, max_size=max_len))
    if interval is None:
        interval = draw(st.sampled_from([30, 60, 120]))
    keep = draw(st.lists(st.booleans(), min_size=len(values), max_size=len(values)))
    samples = tuple(
        Sample(timestamp=k * interval, pm25=v)
        for k, (v, kept) in enumerate(zip(values, keep))
        if kept
    )
    return Series("d", interval, samples)


class TestTimeseriesInvariants:
    @CASES
    @given(pm25_series())
    def test_average_identity_interval_idempotent(self, series):
        out, _ = average_interval(series, series.interval)
        assert [s.pm25 for s in out.samples] == [s.pm25 for s in series.samples]
        assert out.timestamps == series.timestamps

    @CASES
    @given(pm25_series(), st.floats(min_value=0.01, max_value=50.0), st.integers(1, 4))
    def test_average_commutes_with_scaling(self, series, k, factor):
        target = series.interval * factor
        scaled = Series(
            series.device_id, series.interval,
            tuple(Sample(timestamp=s.timestamp, pm25=k * s.pm25) for s in series.samples),
        )
        base, _ = average_interval(series, target)
        out, _ = average_interval(scaled, target)
        for a, b in zip(base.samples, out.samples):
            assert b.pm25 == pytest.approx(k * a.pm25, rel=1e-9)

    @CASES
    @given(
        pm25_series(min_len=2),
        st.lists(st.tuples(st.integers(0, 2000), st.integers(1, 500)), max_size=4),
        st.lists(st.tuples(st.integers(0, 2000), st.integers(1, 500)), max_size=4),
    )
    def test_mask_union_equals_sequential_application(self, series, w1, w2):
        m1 = IntervalMask(tuple((a, a + d) for a, d in w1))
        m2 = IntervalMask(tuple((a, a + d) for a, d in w2))
        joint, _ = apply_mask(series, m1.union(m2))
        first, _ = apply_mask(series, m1)
        sequential, _ = apply_mask(first, m2)
        assert joint == sequential

    @CASES
    @given(pm25_series(interval=60), pm25_series(interval=60))
    def test_align_bounded_by_valid_counts(self, a, b):
        pairs = align_collocated(a, b, covariates=())
        valid_a = sum(1 for s in a.samples if s.valid)
        valid_b = sum(1 for s in b.samples if s.valid)
        assert pairs.n <= min(valid_a, valid_b)
        a_times, b_times = set(a.timestamps), set(b.timestamps)
        assert all(t in a_times and t in b_times for t in pairs.timestamps)

    @CASES
    @given(pm25_series(min_len=1), st.integers(1, 5))
    def test_unitwise_average_of_copies_is_identity(self, series, n_copies):
        for min_units in range(1, n_copies + 1):
            out = unitwise_average([series] * n_copies, min_units=min_units)
            assert out.timestamps == series.timestamps
            for got, want in zip(out.samples, series.samples):
                assert got.pm25 == pytest.approx(want.pm25, rel=1e-12)

    @CASES
    @given(pm25_series(), st.lists(st.integers(0, 50), min_size=1, max_size=60))
    def test_completeness_bounded(self, series, offsets):
        schedule = [series.interval * k for k in offsets]
        value = completeness(series, schedule)
        assert 0.0 <= value <= 100.0


class TestStatcoreInvariants:
    def test_t_quantile_normal_limit(self):
        assert t_quantile(0.95, 1_000_000) == pytest.approx(1.6449, abs=1e-3)

    @CASES
    @given(
        st.floats(min_value=0.001, max_value=0.998),
        st.floats(min_value=1e-4, max_value=0.999),
        st.floats(min_value=1.0, max_value=5000.0),
    )
    def test_chi2_quantile_strictly_increasing(self, p, step, df):
        q = p + step * (0.999 - p)
        assume(q > p)
        assert chi2_quantile(q, df) > chi2_quantile(p, df)

    @CASES
    @given(
        st.lists(st.floats(-100, 100), min_size=3, max_size=20),
        st.floats(min_value=0.01, max_value=50.0),
        st.floats(min_value=-50.0, max_value=50.0),
        st.booleans(),
    )
    def test_pearson_affine_invariance(self, ys, a, b, flip):
        xs = list(range(len(ys)))
        assume(float(np.std(ys)) > 1e-6)
        base = pearson_r(xs, ys)
        scale = -a if flip else a
        transformed = pearson_r([scale * x + b for x in xs], ys)
        expected = -base if flip else base
        assert transformed == pytest.approx(expected, abs=1e-9)

    @CASES
    @given(
        st.lists(st.floats(-100, 100), min_size=2, max_size=20),
        st.floats(min_value=-20.0, max_value=20.0),
        st.floats(min_value=-10.0, max_value=10.0),
    )
    def test_sample_sd_translation_and_scale(self, values, shift, scale):
        base = sample_stats(values)
        shifted = sample_stats([v + shift for v in values])
        assert shifted.sd == pytest.approx(base.sd, abs=1e-7 * (1 + abs(shift)))
        scaled = sample_stats([scale * v for v in values])
        assert scaled.sd == pytest.approx(abs(scale) * base.sd, rel=1e-9, abs=1e-9)


class TestOpticsInvariants:
    @pytest.mark.parametrize("x", [1.0, 10.0])
    def test_mie_truncation_converged(self, x):
        base = mie_intensity(x, 1.5 + 0j, 60.0)
        deeper = mie_intensity(x, 1.5 + 0j, 60.0, terms=wiscombe_terms(x) + 25)
        assert deeper[0] == pytest.approx(base[0], rel=1e-9)
        assert deeper[1] == pytest.approx(base[1], rel=1e-9)

    @CASES
    @given(
        st.floats(min_value=1e-4, max_value=0.01),
        st.floats(min_value=0.0, max_value=180.0),
        st.floats(min_value=1.1, max_value=2.0),
    )
    def test_rayleigh_agreement_below_boundary(self, x, angle, m_real):
        assume(0.0 < angle < 180.0)
        i1, i2 = mie_intensity(x, complex(m_real, 0.0), angle)
        r1, r2 = rayleigh_intensity(x, complex(m_real, 0.0), angle)
        assert i1 == pytest.approx(r1, rel=0.01)
        assert i2 == pytest.approx(r2, rel=0.01, abs=1e-3 * r1)

    @CASES
    @given(
        st.lists(st.integers(0, 1000), min_size=1, max_size=5),
        st.lists(st.integers(0, 1000), min_size=1, max_size=5),
        st.floats(min_value=0.2, max_value=3.0),
    )
    def test_opc_additive_and_density_homogeneous(self, counts_a, counts_b, density):
        n = min(len(counts_a), len(counts_b))
        midpoints = tuple(0.4 + 0.5 * k for k in range(n))
        base = AerosolAssumptions({1.0: 1.0}, cut_diameter=10.0)
        scaled = AerosolAssumptions({1.0: 1.0}, density=base.density * density, cut_diameter=10.0)
        def conc(counts, assumptions=base):
            bins = BinCounts(midpoints, tuple(counts), flow_rate=1.0, duration=60.0)
            return opc_mass_concentration(bins, assumptions)
        a, b = counts_a[:n], counts_b[:n]
        joint = conc([x + y for x, y in zip(a, b)])
        assert joint == pytest.approx(conc(a) + conc(b), rel=1e-12, abs=1e-15)
        assert conc(a, scaled) == pytest.approx(density * conc(a), rel=1e-12, abs=1e-15)

    @CASES
    @given(
        st.permutations(list(range(4))),
        st.floats(min_value=0.1, max_value=0.7),
    )
    def test_pnm_sensitivity_permutation_invariant(self, order, w0):
        diameters = (0.3, 0.7, 1.1, 1.9)
        weights = (w0, (1 - w0) * 0.5, (1 - w0) * 0.3, (1 - w0) * 0.2)
        bins = tuple(zip(diameters, weights))
        permuted_bins = tuple(bins[i] for i in order)
        geometry = OpticalGeometry(0.65, 90.0)
        base = pnm_sensitivity(AerosolAssumptions(bins, cut_diameter=2.5), geometry)
        shuffled = pnm_sensitivity(AerosolAssumptions(permuted_bins, cut_diameter=2.5), geometry)
        assert shuffled == base


def tiny_scenario(fog=(), volatility=0.2):
    return TruthScenario(
        duration=40 * 60, interval=60,
        base_pm25=MeanRevertingLevel(30.0, 1e-4, volatility),
        pm1_fraction=0.6, pm10_ratio=1.6,
        rh_profile=DiurnalProfile(70.0, 25.0),
        temp_profile=DiurnalProfile(18.0, 5.0),
        fog_events=fog,
    )


class TestSynthgenInvariants:
    @CASES
    @given(st.integers(0, 2**32 - 1))
    def test_determinism(self, seed):
        scenario = tiny_scenario()
        assert generate_truth(scenario, seed) == generate_truth(scenario, seed)

    @CASES
    @given(st.integers(0, 2**31), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
    def test_hygro_monotone(self, seed, k1, k2):
        lo, hi = sorted((k1, k2))
        scenario = tiny_scenario()
        ref, met = generate_truth(scenario, seed % 7)
        a, _ = simulate_sensor(ref, met, SensorProfile(deliquescence_rh=70.0, hygro_coeff=lo), (), seed)
        b, _ = simulate_sensor(ref, met, SensorProfile(deliquescence_rh=70.0, hygro_coeff=hi), (), seed)
        for s_a, s_b, s_m in zip(a.samples, b.samples, met.samples):
            if s_m.rh >= 70.0:
                assert s_b.pm25 >= s_a.pm25 - 1e-12

    @CASES
    @given(st.integers(0, 2**31), st.floats(0.2, 3.0), st.floats(0.0, 8.0))
    def test_ordering_maintained(self, seed, gain, noise):
        scenario = tiny_scenario()
        ref, met = generate_truth(scenario, seed % 11)
        profile = SensorProfile(gain=gain, offset=1.0, noise_sd=noise)
        series, _ = simulate_sensor(ref, met, profile, (), seed)
        for s in series.samples:
            assert 0.0 <= s.pm1 <= s.pm25 <= s.pm10

    @CASES
    @given(st.integers(0, 2**31), st.floats(10.0, 200.0), st.integers(0, 30), st.integers(1, 20))
    def test_fog_labels_exact(self, seed, loading, start_min, length_min):
        fog = (FogEvent(start_min * 60, (start_min + length_min) * 60, loading),)
        scenario = tiny_scenario(fog=fog)
        ref, met = generate_truth(scenario, seed % 5)
        profile = SensorProfile(condensation_susceptibility=1.0)
        series, labels = simulate_sensor(ref, met, profile, fog, seed)
        expected = {t for t in series.timestamps if fog[0].contains(t)}
        assert set(labels) == expected


RATIO = st.floats(min_value=0.5, max_value=12.0)


class TestCleanseInvariants:
    @CASES
    @given(
        st.lists(RATIO, min_size=3, max_size=12),
        st.floats(0.0, 40.0), st.floats(0.0, 150.0), st.floats(0.0, 100.0),
    )
    def test_window_length_constant(self, ratios, pm1, pm25_extra, rh):
        config = CleanseConfig(window_size=len(ratios))
        state = RatioWindowState(tuple(ratios))
        pm25 = pm1 + pm25_extra
        pm10 = pm25 + 1.0
        new_state, _ = cleanse_step(state, (pm1, pm25, pm10), rh, config)
        assert len(new_state.ratios) == config.window_size

    @CASES
    @given(st.lists(RATIO, min_size=3, max_size=12), st.floats(80.0, 100.0), st.floats(20.0, 100.0))
    def test_reject_never_mutates_window(self, ratios, rh, pm1):
        config = CleanseConfig(window_size=len(ratios))
        state = RatioWindowState(tuple(ratios))
        mean, sd = state.mean_sd()
        outlier = (mean + config.beta * sd) * 1.5 + 1.0  # strictly beyond the gate
        pm = (pm1, pm1, pm1 * outlier)  # pm25 = pm1 >= c_low keeps the gate active
        new_state, decision = cleanse_step(state, pm, rh, config)
        assert decision.verdict is Verdict.REJECT
        assert new_state == state
        replay_state, replay = cleanse_step(state, pm, rh, config)
        assert replay_state == new_state and replay == decision

    @CASES
    @given(st.lists(RATIO, min_size=3, max_size=12), st.floats(0.0, 100.0), st.floats(0.0, 100.0),
           st.lists(RATIO, min_size=3, max_size=12))
    def test_low_concentration_independent_of_rh_and_window(self, ratios, rh_a, rh_b, other):
        config = CleanseConfig(window_size=len(ratios))
        pm = (2.0, 10.0, 12.0)  # pm25 below c_low
        s1, d1 = cleanse_step(RatioWindowState(tuple(ratios)), pm, rh_a, config)
        s2, d2 = cleanse_step(RatioWindowState(tuple(ratios)), pm, rh_b, config)
        assert d1.verdict is d2.verdict is Verdict.ACCEPT_NO_UPDATE
        config_b = CleanseConfig(window_size=len(other))
        s3, d3 = cleanse_step(RatioWindowState(tuple(other)), pm, rh_a, config_b)
        assert d3.verdict is Verdict.ACCEPT_NO_UPDATE

    @CASES
    @given(
        st.lists(st.tuples(st.floats(0.5, 30.0), st.floats(0.0, 100.0), st.floats(0.0, 99.9)),
                 min_size=1, max_size=25),
    )
    def test_h_low_100_disables_rejection(self, rows):
        # rh is drawn below 100: at exactly rh = 100 the strict humidity guard
        # no longer short-circuits and the ratio gate applies.
        config = CleanseConfig(h_low=100.0)
        samples = []
        rhs = []
        for k, (pm1, extra, rh) in enumerate(rows):
            pm25 = pm1 + extra
            samples.append(Sample(timestamp=60 * k, pm1=pm1, pm25=pm25, pm10=pm25 * 1.5))
            rhs.append(Sample(timestamp=60 * k, rh=rh))
        pm = Series("pm", 60, tuple(samples))
        rh_series = Series("rh", 60, tuple(rhs))
        result = cleanse_series(pm, rh_series, config, RatioWindowState((3.0,) * 30))
        assert result.rejected_timestamps == ()
        assert result.cleansed == pm


@st.composite
def regression_pairs(draw):
    n = draw(st.integers(min_value=8, max_value=40))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    x = rng.uniform(1.0, 100.0, n)
    y = draw(st.floats(-5, 5)) + draw(st.floats(0.1, 3.0)) * x + rng.normal(0, 2.0, n)
    return CollocatedPairs(np.arange(n, dtype=np.int64) * 60, x, y)


class TestCalibrateInvariants:
    @CASES
    @given(regression_pairs())
    def test_ols_residuals_sum_to_zero(self, pairs):
        model = fit(ModelKind.OLS, pairs)
        residuals = pairs.y - (model.coefficients[0] + model.coefficients[1] * pairs.x)
        scale = float(np.abs(pairs.y).max()) + 1.0
        assert abs(float(residuals.sum())) <= 1e-9 * pairs.n * scale

    @CASES
    @given(regression_pairs(), st.floats(0.1, 20.0), st.floats(-50.0, 50.0))
    def test_fit_equivariance(self, pairs, a, c):
        base = fit(ModelKind.OLS, pairs)
        scaled = fit(ModelKind.OLS, CollocatedPairs(pairs.timestamps, pairs.x, a * pairs.y))
        assert scaled.coefficients[0] == pytest.approx(a * base.coefficients[0], rel=1e-7, abs=1e-7)
        assert scaled.coefficients[1] == pytest.approx(a * base.coefficients[1], rel=1e-7, abs=1e-9)
        shifted = fit(ModelKind.OLS, CollocatedPairs(pairs.timestamps, pairs.x + c, pairs.y))
        assert shifted.coefficients[1] == pytest.approx(base.coefficients[1], rel=1e-7, abs=1e-9)
        expected_intercept = base.coefficients[0] - base.coefficients[1] * c
        assert shifted.coefficients[0] == pytest.approx(expected_intercept, rel=1e-7, abs=1e-7)

    @CASES
    @given(regression_pairs())
    def test_r_squared_in_unit_interval(self, pairs):
        model = fit(ModelKind.OLS, pairs)
        assert 0.0 <= model.r_squared <= 1.0

    @CASES
    @given(st.floats(-10, 10), st.floats(0.1, 5.0), st.integers(6, 30), st.integers(0, 2**31))
    def test_exact_linear_zero_residual_and_ci(self, intercept, slope, n, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, 50.0, n)
        assume(float(np.ptp(x)) > 1e-6)
        pairs = CollocatedPairs(np.arange(n, dtype=np.int64), x, intercept + slope * x)
        model = fit(ModelKind.OLS, pairs)
        scale = 1.0 + abs(intercept) + abs(slope) * 50.0
        assert model.residual_sd <= 1e-9 * scale
        assert all(h <= 1e-6 * scale for h in model.half_widths)

    @CASES
    @given(regression_pairs())
    def test_variance_decomposition(self, pairs):
        model = fit(ModelKind.OLS, pairs)
        fitted = model.coefficients[0] + model.coefficients[1] * pairs.x
        sse = float(np.sum((pairs.y - fitted) ** 2))
        explained = float(np.sum((fitted - pairs.y.mean()) ** 2))
        total = float(np.sum((pairs.y - pairs.y.mean()) ** 2))
        assert sse + explained == pytest.approx(total, rel=1e-9)


class TestEvaluateInvariants:
    @CASES
    @given(st.lists(st.tuples(st.floats(3.0, 300.0), st.floats(3.0, 300.0)),
                    min_size=1, max_size=30))
    def test_relative_error_role_swap_identity(self, rows):
        x = np.array([a for a, _ in rows])
        y = np.array([b for _, b in rows])
        ts = np.arange(len(rows), dtype=np.int64)
        forward = relative_errors(CollocatedPairs(ts, x, y)).values
        backward = relative_errors(CollocatedPairs(ts, y, x)).values
        # d(x, y) = -100 * d(y, x) / (100 + d(y, x))
        assert np.allclose(forward, -100.0 * backward / (100.0 + backward), rtol=1e-9)

    @CASES
    @given(st.lists(st.floats(-40.0, 40.0), min_size=2, max_size=40))
    def test_bias_half_width_scaling_under_duplication(self, values):
        base = np.asarray(values)
        assume(float(np.std(base)) > 1e-9)
        doubled = np.concatenate([base, base])
        hw2 = bias_pep(RelErrorSet(doubled, len(doubled), 3.0, len(doubled))).half_width
        stats = sample_stats(doubled)
        expected = t_quantile(0.95, len(doubled) - 1) * stats.sd / math.sqrt(len(doubled))
        assert hw2 == pytest.approx(expected, rel=1e-12)

    @CASES
    @given(st.lists(st.floats(-40.0, 40.0), min_size=2, max_size=40))
    def test_sigma_ucl_not_below_sample_sd(self, values):
        errors = RelErrorSet(np.asarray(values), len(values), 3.0, len(values))
        stats = sample_stats(values)
        assert sigma_ucl(errors).sigma_ucl >= stats.sd - 1e-12

    @CASES
    @given(regression_pairs())
    def test_comparability_is_swapped_axes_ols(self, pairs):
        result = comparability(pairs)
        swapped = CollocatedPairs(pairs.timestamps, pairs.y, pairs.x)
        model = fit(ModelKind.OLS, swapped)
        assert result.slope == pytest.approx(model.coefficients[1], rel=1e-9)
        assert result.intercept == pytest.approx(model.coefficients[0], rel=1e-9, abs=1e-9)

    @CASES
    @given(regression_pairs())
    def test_pass_flags_recomputable_from_reported_numbers(self, pairs):
        result = comparability(pairs)
        assert result.slope_pass == (0.90 <= result.slope <= 1.10)
        lower = max(-2.0, 15.05 - result.slope * 17.32)
        upper = min(2.0, 15.05 - result.slope * 13.20)
        assert result.intercept_pass == (lower <= result.intercept <= upper)
        assert result.r_pass == (result.r >= result.r_threshold_used)
