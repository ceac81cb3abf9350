"""Tests for the noise allocators and the brute-force grid oracle."""

import math
import warnings

import numpy as np
import pytest

from noisefill.allocators import (
    NonConvexInstanceError,
    NonConvexityWarning,
    SolveOptions,
    allocate_arbitrary_total,
    allocate_gaussian_total,
    allocate_minimax,
    allocate_sibson_total,
    allocate_uniform,
    make_solver,
    oracle_solve,
    write_allocation_csv,
)
from noisefill.channels import SubchannelSet
from noisefill.inputs import BinaryInput, ExponentialInput, GaussianInput


def random_instance(rng, m):
    P = rng.uniform(0.05, 4.0, m)
    Z = rng.uniform(0.1, 2.0, m)
    return SubchannelSet(P=P, Z=Z)


def gaussian_kkt_residuals(channels, alloc):
    """Water-filling optimality residuals: active channels must sit exactly
    on the dual level, inactive ones strictly below their threshold."""
    N, level = alloc.N, alloc.dual
    active = N > 0
    Za, Pa = channels.Z[active], channels.P[active]
    res_active = 1.0 / (N[active] + Za) - 1.0 / (N[active] + Za + Pa) - level
    thresholds = channels.P / (channels.Z * (channels.Z + channels.P))
    slack_inactive = thresholds[~active] - level
    return res_active, slack_inactive


class TestSolveOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolveOptions(budget=-1.0)
        with pytest.raises(ValueError):
            SolveOptions(budget=math.inf)
        with pytest.raises(ValueError):
            SolveOptions(budget=1.0, dual_tol=0.0)
        with pytest.raises(ValueError):
            SolveOptions(budget=1.0, max_iter=3)


class TestUniform:
    def test_even_split(self):
        ch = SubchannelSet(P=np.ones(4), Z=np.ones(4))
        np.testing.assert_array_equal(allocate_uniform(ch, 8.0).N, [2.0, 2.0, 2.0, 2.0])

    def test_zero_budget(self):
        ch = SubchannelSet(P=[1.0], Z=[1.0])
        np.testing.assert_array_equal(allocate_uniform(ch, 0.0).N, [0.0])

    def test_thirds(self):
        ch = SubchannelSet(P=np.ones(3), Z=np.ones(3))
        np.testing.assert_allclose(allocate_uniform(ch, 1.0).N, 1.0 / 3.0, rtol=1e-15)

    def test_rejects_bad_budget(self):
        ch = SubchannelSet(P=[1.0], Z=[1.0])
        with pytest.raises(ValueError):
            allocate_uniform(ch, -1.0)


class TestGaussianTotal:
    def test_symmetric_split(self):
        ch = SubchannelSet(P=[1.0, 1.0], Z=[1.0, 1.0])
        alloc = allocate_gaussian_total(ch, SolveOptions(budget=2.0))
        np.testing.assert_allclose(alloc.N, [1.0, 1.0], atol=1e-9)

    def test_single_channel_dual(self):
        # At N = 1 the marginal rate is 1/2 - 1/3 = 1/6, which the dual
        # must equal for the full-budget single-channel solve.
        ch = SubchannelSet(P=[1.0], Z=[1.0])
        alloc = allocate_gaussian_total(ch, SolveOptions(budget=1.0))
        np.testing.assert_allclose(alloc.N, [1.0], atol=1e-9)
        assert math.isclose(alloc.dual, 1.0 / 6.0, abs_tol=1e-9)

    def test_weak_channel_starved(self):
        ch = SubchannelSet(P=[1.0, 1.0], Z=[1.0, 10.0])
        alloc = allocate_gaussian_total(ch, SolveOptions(budget=0.5))
        np.testing.assert_allclose(alloc.N, [0.5, 0.0], atol=1e-8)
        assert alloc.dual >= 1.0 / 10.0 - 1.0 / 11.0

    def test_matches_grid_oracle(self):
        ch = SubchannelSet(P=[1.0, 1.0], Z=[1.0, 10.0])
        alloc = allocate_gaussian_total(ch, SolveOptions(budget=0.5))
        orc = oracle_solve(ch, GaussianInput(), 0.5, "total", grid_step=1e-4)
        np.testing.assert_allclose(alloc.N, orc.N, atol=2e-4)

    def test_zero_budget_reports_threshold_dual(self):
        ch = SubchannelSet(P=[1.0, 4.0], Z=[1.0, 1.0])
        alloc = allocate_gaussian_total(ch, SolveOptions(budget=0.0))
        np.testing.assert_array_equal(alloc.N, [0.0, 0.0])
        assert math.isclose(alloc.dual, 4.0 / (1.0 * 5.0), rel_tol=1e-12)

    def test_zero_power_channels_get_nothing(self):
        ch = SubchannelSet(P=[0.0, 1.0, 0.0], Z=[1.0, 1.0, 1.0])
        alloc = allocate_gaussian_total(ch, SolveOptions(budget=2.0))
        assert alloc.N[0] == 0.0 and alloc.N[2] == 0.0
        np.testing.assert_allclose(alloc.N[1], 2.0, rtol=1e-9)

    def test_all_dead_instance_rejected(self):
        ch = SubchannelSet(P=[0.0, 0.0], Z=[1.0, 1.0])
        with pytest.raises(ValueError, match="P = 0"):
            allocate_gaussian_total(ch, SolveOptions(budget=1.0))

    def test_kkt_certificate_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            ch = random_instance(rng, rng.integers(2, 8))
            budget = float(rng.uniform(0.1, 3.0))
            alloc = allocate_gaussian_total(ch, SolveOptions(budget=budget))
            assert abs(alloc.budget_used - budget) <= 1e-10 * max(1.0, budget)
            res_active, slack_inactive = gaussian_kkt_residuals(ch, alloc)
            assert np.all(np.abs(res_active) <= 1e-9)
            assert np.all(slack_inactive <= alloc.dual * 1e-9 + 1e-12)


class TestSibsonTotal:
    def test_alpha_one_recovers_total_solver(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            ch = random_instance(rng, 4)
            opts = SolveOptions(budget=1.5)
            a = allocate_sibson_total(ch, 1.0, opts)
            b = allocate_gaussian_total(ch, opts)
            np.testing.assert_allclose(a.N, b.N, atol=1e-12)

    def test_alpha_scaled_dual(self):
        # With alpha = 2 the single-channel residual 1/(N+Z) - 1/(N+Z+2P)
        # at N = 1 equals 1/2 - 1/4.
        ch = SubchannelSet(P=[1.0], Z=[1.0])
        alloc = allocate_sibson_total(ch, 2.0, SolveOptions(budget=1.0))
        np.testing.assert_allclose(alloc.N, [1.0], atol=1e-9)
        assert math.isclose(alloc.dual, 0.25, abs_tol=1e-9)

    def test_zero_power_channel(self):
        ch = SubchannelSet(P=[0.0, 1.0], Z=[1.0, 1.0])
        alloc = allocate_sibson_total(ch, 3.0, SolveOptions(budget=1.0))
        np.testing.assert_allclose(alloc.N, [0.0, 1.0], atol=1e-9)

    def test_rejects_bad_alpha(self):
        ch = SubchannelSet(P=[1.0], Z=[1.0])
        with pytest.raises(ValueError):
            allocate_sibson_total(ch, 0.0, SolveOptions(budget=1.0))


class TestMinimax:
    def test_floods_the_strong_channel(self):
        ch = SubchannelSet(P=[4.0, 1.0], Z=[1.0, 1.0])
        alloc = allocate_minimax(ch, SolveOptions(budget=3.0))
        np.testing.assert_allclose(alloc.N, [3.0, 0.0], atol=1e-9)
        assert math.isclose(alloc.dual, 1.0, rel_tol=1e-10)

    def test_symmetric_levels(self):
        ch = SubchannelSet(P=[4.0, 4.0], Z=[1.0, 1.0])
        alloc = allocate_minimax(ch, SolveOptions(budget=2.0))
        np.testing.assert_allclose(alloc.N, [1.0, 1.0], atol=1e-9)
        assert math.isclose(alloc.dual, 2.0, rel_tol=1e-10)

    def test_zero_budget(self):
        ch = SubchannelSet(P=[1.0, 1.0], Z=[1.0, 1.0])
        alloc = allocate_minimax(ch, SolveOptions(budget=0.0))
        np.testing.assert_array_equal(alloc.N, [0.0, 0.0])
        assert alloc.dual == 1.0

    def test_matches_grid_oracle(self):
        ch = SubchannelSet(P=[4.0, 1.0], Z=[1.0, 1.0])
        orc = oracle_solve(ch, GaussianInput(), 3.0, "max", grid_step=0.01)
        np.testing.assert_allclose(orc.N, [3.0, 0.0], atol=0.011)

    def test_equal_snr_certificate_on_random_instances(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            m = int(rng.integers(2, 100))
            ch = random_instance(rng, m)
            budget = float(rng.uniform(0.05, 2.0 * m))
            alloc = allocate_minimax(ch, SolveOptions(budget=budget))
            assert abs(alloc.budget_used - budget) <= 1e-10 * max(1.0, budget)
            after = ch.snr(alloc.N)
            active = alloc.N > 0
            if np.any(active):
                np.testing.assert_allclose(after[active], alloc.dual, rtol=1e-9)
            assert np.all(after[~active] <= alloc.dual * (1 + 1e-12) + 1e-15)

    def test_model_argument_is_ignored(self):
        ch = SubchannelSet(P=[2.0, 1.0, 0.5], Z=[0.5, 1.0, 1.0])
        opts = SolveOptions(budget=1.3)
        base = allocate_minimax(ch, opts)
        for model in (GaussianInput(), BinaryInput(), ExponentialInput()):
            np.testing.assert_array_equal(allocate_minimax(ch, opts, model=model).N, base.N)


class TestArbitraryTotal:
    def test_gaussian_model_single_channel(self):
        ch = SubchannelSet(P=[1.0], Z=[1.0])
        alloc = allocate_arbitrary_total(ch, GaussianInput(), SolveOptions(budget=1.0))
        np.testing.assert_allclose(alloc.N, [1.0], atol=1e-8)
        assert math.isclose(alloc.dual, 1.0 / 6.0, abs_tol=1e-8)
        assert not alloc.stationary_only

    def test_gaussian_model_matches_closed_form(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            ch = random_instance(rng, int(rng.integers(2, 6)))
            budget = float(rng.uniform(0.2, 3.0))
            opts = SolveOptions(budget=budget)
            direct = allocate_gaussian_total(ch, opts)
            general = allocate_arbitrary_total(ch, GaussianInput(), opts)
            np.testing.assert_allclose(general.N, direct.N, atol=1e-6)

    def test_binary_model_matches_grid_oracle(self):
        # Both post-allocation SNRs stay below the binary convexity
        # boundary, so the stationary point is the global optimum.
        b = BinaryInput()
        ch = SubchannelSet(P=[1.0, 0.5], Z=[1.0, 1.0])
        alloc = allocate_arbitrary_total(ch, b, SolveOptions(budget=0.4))
        orc = oracle_solve(ch, b, 0.4, "total", grid_step=1e-3)
        np.testing.assert_allclose(alloc.N, orc.N, atol=1e-3)
        assert not alloc.stationary_only

    def test_stationarity_residual_on_active_channels(self):
        b = BinaryInput()
        ch = SubchannelSet(P=[1.0, 0.5, 0.0], Z=[1.0, 1.0, 1.0])
        alloc = allocate_arbitrary_total(ch, b, SolveOptions(budget=0.4))
        active = alloc.N > 0
        rho = ch.P[active] / (alloc.N[active] + ch.Z[active])
        lhs = ch.P[active] / (alloc.N[active] + ch.Z[active]) ** 2 * b.mmse(rho)
        np.testing.assert_allclose(lhs, alloc.dual, atol=1e-8)
        assert alloc.N[2] == 0.0

    def test_nonconvex_bracketing_detected(self):
        # At SNR 30 the binary stationarity map rises steeply before it
        # falls, so bracketing must fail loudly with diagnostics instead
        # of silently bisecting a non-monotone function.
        ch = SubchannelSet(P=[30.0], Z=[1.0])
        with pytest.raises(NonConvexInstanceError) as excinfo:
            allocate_arbitrary_total(ch, BinaryInput(), SolveOptions(budget=1.0))
        assert "channel" in excinfo.value.diagnostics

    def test_unmatchable_budget_reported_as_nonconvex(self):
        # Past the boundary the demand curve is discontinuous in the dual
        # level; a budget inside the gap has no matching level.
        ch = SubchannelSet(P=[4.5], Z=[1.0])
        with pytest.raises(NonConvexInstanceError, match="convexity margin"):
            allocate_arbitrary_total(ch, BinaryInput(), SolveOptions(budget=0.5))

    def test_stationary_solution_flagged_not_certified(self):
        # Enough budget lands the solution in the convex region, but the
        # SNR range it passed through is partly past the boundary: the
        # result is stationary, with global optimality uncertified.
        ch = SubchannelSet(P=[4.5], Z=[1.0])
        with pytest.warns(NonConvexityWarning):
            alloc = allocate_arbitrary_total(ch, BinaryInput(), SolveOptions(budget=2.0))
        assert alloc.stationary_only
        np.testing.assert_allclose(alloc.N, [2.0], atol=1e-8)

    def test_convex_instances_not_flagged(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", NonConvexityWarning)
            ch = SubchannelSet(P=[0.8, 0.3], Z=[1.0, 0.5])
            alloc = allocate_arbitrary_total(ch, BinaryInput(), SolveOptions(budget=0.6))
        assert not alloc.stationary_only

    def test_budget_never_overshoots(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            ch = random_instance(rng, 3)
            budget = float(rng.uniform(0.2, 1.5))
            alloc = allocate_arbitrary_total(ch, GaussianInput(), SolveOptions(budget=budget))
            assert alloc.budget_used <= budget * (1 + 1e-10)
            assert abs(alloc.budget_used - budget) <= 1e-10 * max(1.0, budget)


class TestOracleSolve:
    def test_single_channel_takes_everything(self):
        ch = SubchannelSet(P=[1.0], Z=[1.0])
        orc = oracle_solve(ch, GaussianInput(), 1.0, "total")
        np.testing.assert_array_equal(orc.N, [1.0])

    def test_symmetric_total(self):
        ch = SubchannelSet(P=[1.0, 1.0], Z=[1.0, 1.0])
        orc = oracle_solve(ch, GaussianInput(), 2.0, "total", grid_step=0.01)
        np.testing.assert_allclose(orc.N, [1.0, 1.0], atol=0.011)

    def test_four_channel_symmetry(self):
        ch = SubchannelSet(P=np.ones(4), Z=np.ones(4))
        orc = oracle_solve(ch, GaussianInput(), 2.0, "total", grid_step=0.05)
        np.testing.assert_allclose(orc.N, 0.5, atol=0.051)

    def test_validation(self):
        ch = SubchannelSet(P=[1.0], Z=[1.0])
        with pytest.raises(ValueError, match="objective"):
            oracle_solve(ch, GaussianInput(), 1.0, "median")
        with pytest.raises(ValueError, match="grid_step"):
            oracle_solve(ch, GaussianInput(), 1.0, grid_step=0.0)
        big = SubchannelSet(P=np.ones(5), Z=np.ones(5))
        with pytest.raises(ValueError, match="at most 4"):
            oracle_solve(big, GaussianInput(), 1.0)
        wide = SubchannelSet(P=np.ones(4), Z=np.ones(4))
        with pytest.raises(ValueError, match="refusing"):
            oracle_solve(wide, GaussianInput(), 2.0, grid_step=1e-3)


class TestMakeSolver:
    def test_known_names(self):
        ch = SubchannelSet(P=[1.0, 2.0], Z=[1.0, 1.0])
        for name in ("uniform", "gaussian_total", "minimax"):
            alloc = make_solver(name)(ch, 1.0)
            assert math.isclose(alloc.budget_used, 1.0, rel_tol=1e-9)
        assert make_solver("sibson", alpha=2.0)(ch, 1.0).objective_kind == "total"
        arb = make_solver("arbitrary", model=GaussianInput())(ch, 1.0)
        assert arb.objective_kind == "total"

    def test_missing_requirements(self):
        with pytest.raises(ValueError, match="alpha"):
            make_solver("sibson")
        with pytest.raises(ValueError, match="model"):
            make_solver("arbitrary")
        with pytest.raises(ValueError, match="unknown solver"):
            make_solver("annealing")


class TestAllocationCsv:
    def test_rows_and_footer(self, tmp_path):
        ch = SubchannelSet(P=[1.0, 4.0], Z=[1.0, 1.0])
        alloc = allocate_gaussian_total(ch, SolveOptions(budget=2.0))
        path = tmp_path / "alloc.csv"
        write_allocation_csv(ch, alloc, GaussianInput(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "index,P,Z,N,snr_before,snr_after,mi_after"
        assert len(lines) == 4
        assert lines[-1].startswith("# objective=total dual=")

    def test_zero_budget_rows(self, tmp_path):
        ch = SubchannelSet(P=[1.0, 4.0], Z=[1.0, 1.0])
        alloc = allocate_gaussian_total(ch, SolveOptions(budget=0.0))
        path = tmp_path / "alloc.csv"
        write_allocation_csv(ch, alloc, GaussianInput(), path)
        for line in path.read_text().splitlines()[1:3]:
            assert line.split(",")[3] == "0.0"

    def test_rewrite_is_byte_identical(self, tmp_path):
        ch = SubchannelSet(P=[1.0, 0.3], Z=[0.7, 1.0])
        alloc = allocate_minimax(ch, SolveOptions(budget=1.0))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_allocation_csv(ch, alloc, GaussianInput(), a)
        write_allocation_csv(ch, alloc, GaussianInput(), b)
        assert a.read_bytes() == b.read_bytes()
