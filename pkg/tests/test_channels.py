"""Tests for the subchannel model, leakage measures, and channel CSV I/O."""

import math

import numpy as np
import pytest

from noisefill.channels import (
    LeakageReport,
    NoiseAllocation,
    SubchannelSet,
    fano_pe_lower,
    gaussian_mi,
    read_channels_csv,
    sibson_mi,
    snr,
    write_channels_csv,
)


class TestSnr:
    def test_direct_ratios(self):
        assert snr(1.0, 1.0, 0.0) == 1.0
        assert snr(1.0, 1.0, 1.0) == 0.5
        assert snr(0.0, 5.0, 3.0) == 0.0

    def test_array_form(self):
        out = snr([1.0, 4.0, 0.0], [1.0, 1.0, 2.0], [1.0, 0.0, 0.0])
        np.testing.assert_allclose(out, [0.5, 4.0, 0.0])

    def test_rejects_bad_powers(self):
        with pytest.raises(ValueError):
            snr(1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            snr(-1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            snr(1.0, 1.0, -0.1)


class TestGaussianMi:
    def test_known_points(self):
        assert gaussian_mi(0.0) == 0.0
        assert math.isclose(gaussian_mi(1.0), 0.346574, abs_tol=1e-6)
        assert math.isclose(gaussian_mi(math.e**2 - 1.0), 1.0, rel_tol=1e-12)

    def test_tiny_snr_is_half_rho(self):
        # log1p keeps full precision where naive log(1 + rho) would not.
        rho = 1e-14
        assert math.isclose(gaussian_mi(rho), rho / 2, rel_tol=1e-9)

    def test_rejects_negative_snr(self):
        with pytest.raises(ValueError):
            gaussian_mi(-0.5)


class TestSibsonMi:
    def test_alpha_one_is_mutual_information(self):
        rho = np.linspace(0.0, 9.0, 19)
        np.testing.assert_array_equal(sibson_mi(rho, 1.0), gaussian_mi(rho))

    def test_known_points(self):
        assert math.isclose(sibson_mi(0.5, 2.0), 0.346574, abs_tol=1e-6)
        assert sibson_mi(0.0, 7.0) == 0.0

    def test_monotone_in_alpha(self):
        assert sibson_mi(2.0, 3.0) > sibson_mi(2.0, 1.5) > sibson_mi(2.0, 1.0)

    def test_rejects_nonpositive_alpha(self):
        with pytest.raises(ValueError):
            sibson_mi(1.0, 0.0)


class TestFanoBound:
    def test_zero_leakage(self):
        assert fano_pe_lower(0.0, 256) == 0.875

    def test_one_bit_leakage(self):
        assert math.isclose(fano_pe_lower(math.log(2.0), 256), 0.75, rel_tol=1e-12)

    def test_clamps_at_zero(self):
        assert fano_pe_lower(100.0, 2) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            fano_pe_lower(0.0, 1)
        with pytest.raises(ValueError):
            fano_pe_lower(-0.1, 256)


class TestSubchannelSet:
    def test_arrays_are_read_only(self):
        ch = SubchannelSet(P=[1.0, 2.0], Z=[1.0, 1.0])
        with pytest.raises(ValueError):
            ch.P[0] = 3.0
        with pytest.raises(ValueError):
            ch.Z[0] = 3.0

    def test_snr_method(self):
        ch = SubchannelSet(P=[1.0, 4.0], Z=[1.0, 1.0])
        np.testing.assert_allclose(ch.snr(), [1.0, 4.0])
        np.testing.assert_allclose(ch.snr([1.0, 3.0]), [0.5, 1.0])

    def test_validation(self):
        with pytest.raises(ValueError):
            SubchannelSet(P=[1.0], Z=[0.0])
        with pytest.raises(ValueError):
            SubchannelSet(P=[-1.0], Z=[1.0])
        with pytest.raises(ValueError):
            SubchannelSet(P=[1.0, 2.0], Z=[1.0])
        with pytest.raises(ValueError):
            SubchannelSet(P=[], Z=[])
        with pytest.raises(ValueError):
            SubchannelSet(P=[math.inf], Z=[1.0])


class TestNoiseAllocation:
    def test_budget_used_is_derived(self):
        alloc = NoiseAllocation(N=[1.0, 2.5, 0.0], dual=0.1, objective_kind="total")
        assert alloc.budget_used == 3.5

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseAllocation(N=[-1.0], dual=None, objective_kind="total")
        with pytest.raises(ValueError):
            NoiseAllocation(N=[1.0], dual=None, objective_kind="average")


class TestLeakageReport:
    def test_aggregate_consistency_enforced(self):
        mi = np.array([0.25, 0.5])
        LeakageReport(per_channel_mi=mi, total_mi=0.75, max_mi=0.5, fano_pe_lower=0.8)
        with pytest.raises(ValueError):
            LeakageReport(per_channel_mi=mi, total_mi=0.8, max_mi=0.5, fano_pe_lower=0.8)
        with pytest.raises(ValueError):
            LeakageReport(per_channel_mi=mi, total_mi=0.75, max_mi=0.25, fano_pe_lower=0.8)


class TestChannelsCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "ch.csv"
        ch = SubchannelSet(P=[0.0, 1.25, 4.0], Z=[1.0, 0.5, 2.0])
        write_channels_csv(ch, path)
        back = read_channels_csv(path)
        np.testing.assert_array_equal(back.P, ch.P)
        np.testing.assert_array_equal(back.Z, ch.Z)

    def test_round_trip_preserves_awkward_floats(self, tmp_path):
        path = tmp_path / "ch.csv"
        ch = SubchannelSet(P=[1 / 3, 1e-17], Z=[math.pi, 1e300])
        write_channels_csv(ch, path)
        back = read_channels_csv(path)
        np.testing.assert_array_equal(back.P, ch.P)
        np.testing.assert_array_equal(back.Z, ch.Z)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("P,Z\n1.0,1.0\n")
        with pytest.raises(ValueError, match="header"):
            read_channels_csv(path)

    def test_empty_body_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("index,P,Z\n")
        with pytest.raises(ValueError, match="no rows"):
            read_channels_csv(path)

    def test_out_of_order_index_rejected(self, tmp_path):
        path = tmp_path / "ooo.csv"
        path.write_text("index,P,Z\n1,1.0,1.0\n")
        with pytest.raises(ValueError, match="out of order"):
            read_channels_csv(path)
