import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwaofdm.metrics import PaprValue
from uwaofdm.power import (
    amplifier_efficiency,
    dc_power,
    make_power_report,
    power_report_json,
    power_savings,
    saving_gain,
)

ratios = st.floats(min_value=1.0, max_value=100.0, allow_nan=False)
powers = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


def par(linear):
    return PaprValue.from_linear(linear)


class TestEfficiency:
    def test_constant_envelope_hits_the_ceiling(self):
        assert amplifier_efficiency(par(1.0)) == 0.5

    def test_reference_points(self):
        assert amplifier_efficiency(par(2.0)) == 0.25
        assert amplifier_efficiency(par(10.0)) == pytest.approx(0.05)

    @settings(max_examples=50, deadline=None)
    @given(ratios)
    def test_range_and_monotonicity(self, linear):
        eff = amplifier_efficiency(par(linear))
        assert 0.0 < eff <= 0.5
        assert amplifier_efficiency(par(linear + 1.0)) < eff


class TestDcPower:
    def test_reference_points(self):
        assert dc_power(1.0, par(1.0)) == 2.0
        assert dc_power(1.0, par(4.0)) == 8.0

    def test_non_positive_power_rejected(self):
        with pytest.raises(ValueError):
            dc_power(0.0, par(2.0))

    @settings(max_examples=100, deadline=None)
    @given(powers, ratios)
    def test_closure_with_efficiency(self, p_out, linear):
        value = par(linear)
        assert dc_power(p_out, value) * amplifier_efficiency(value) == pytest.approx(
            p_out, rel=1e-12
        )


class TestSavings:
    def test_equal_ratios_save_nothing(self):
        assert power_savings(1.0, par(3.0), par(3.0)) == 0.0

    def test_reference_point(self):
        assert power_savings(1.0, par(4.0), par(2.0)) == 4.0

    def test_backwards_arguments_rejected(self):
        with pytest.raises(ValueError, match="swap"):
            power_savings(1.0, par(2.0), par(4.0))

    @settings(max_examples=100, deadline=None)
    @given(powers, ratios, ratios)
    def test_closure_with_dc_power(self, p_out, a, b):
        hi, lo = max(a, b), min(a, b)
        saved = power_savings(p_out, par(hi), par(lo))
        assert saved == pytest.approx(dc_power(p_out, par(hi)) - dc_power(p_out, par(lo)), rel=1e-12, abs=1e-12)


class TestSavingGain:
    def test_no_reduction_means_zero(self):
        assert saving_gain(PaprValue.from_db(11.0), PaprValue.from_db(11.0)) == 0.0

    def test_db_difference_basis(self):
        assert saving_gain(PaprValue.from_db(11.0), PaprValue.from_db(9.9)) == pytest.approx(2.2, abs=1e-9)
        assert saving_gain(PaprValue.from_db(9.0), PaprValue.from_db(6.0)) == pytest.approx(6.0, abs=1e-12)

    def test_reference_table_column(self):
        """Twice the dB drop from the 11 dB baseline for each reduced value."""
        finals = [11.0, 9.9, 8.88, 8.25, 7.55]
        expected = [0.0, 2.2, 4.24, 5.5, 6.9]
        initial = PaprValue.from_db(11.0)
        for final_db, gain in zip(finals, expected):
            assert saving_gain(initial, PaprValue.from_db(final_db)) == pytest.approx(gain, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=12.0), st.floats(min_value=0.01, max_value=6.0))
    def test_strictly_increasing_in_the_reduction(self, base_db, delta):
        small = saving_gain(PaprValue.from_db(base_db + delta), PaprValue.from_db(base_db))
        large = saving_gain(PaprValue.from_db(base_db + 2 * delta), PaprValue.from_db(base_db))
        assert large > small


class TestReport:
    def test_fields_and_invariants(self):
        report = make_power_report(2.0, PaprValue.from_db(11.0), PaprValue.from_db(8.0))
        assert report.p_dc_initial >= 2 * report.p_out_avg
        assert report.p_dc_final >= 2 * report.p_out_avg
        assert report.p_savings == pytest.approx(report.p_dc_initial - report.p_dc_final, rel=1e-12)
        assert report.saving_gain_db == pytest.approx(6.0, abs=1e-9)
        assert report.ibo_db == 8.0
        assert 0 < report.efficiency_final <= 0.5

    def test_json_keys_are_unit_annotated(self):
        report = make_power_report(1.0, par(4.0), par(2.0))
        payload = power_report_json(report)
        assert payload["p_dc_initial_watts"] == 8.0
        assert payload["p_dc_final_watts"] == 4.0
        assert payload["p_savings_watts"] == 4.0
        assert payload["efficiency_final_ratio"] == 0.25
        assert math.isclose(payload["par_initial_db"], 10 * math.log10(4.0))
        assert "saving_gain_db_difference_basis" in payload
