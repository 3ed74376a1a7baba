import numpy as np
import pytest

from polygrid.case import full_case, loading_from_profile, reduced_case
from polygrid.devices import DeviceSet, PolynomialModel, TheveninEquivalent, stack_device_powers
from polygrid.errors import SingularJacobianError
from polygrid.grid import (
    Branch,
    GridModel,
    NodeRole,
    injected_power,
    positive_sequence_voltage,
    total_branch_losses,
    total_shunt_absorption,
)
from polygrid.powerflow import (
    PolarState,
    flat_start,
    full_vs_reduced_consistency,
    jacobian,
    mismatch,
    solve_nrm,
    wrap_angles,
)

from conftest import gauss_two_bus_voltage, random_devices, random_grid, two_bus_case


def finite_difference_jacobian(case, state, lam, h=1e-6):
    n = state.dimension
    base = np.concatenate([state.e, state.theta])
    out = np.zeros((2 * n, 2 * n))
    for j in range(2 * n):
        plus, minus = base.copy(), base.copy()
        plus[j] += h
        minus[j] -= h
        f_plus = mismatch(case, PolarState(plus[:n], plus[n:]), lam)
        f_minus = mismatch(case, PolarState(minus[:n], minus[n:]), lam)
        out[:, j] = (f_plus - f_minus) / (2.0 * h)
    return out


def assert_jacobian_matches_fd(case, state, lam):
    jac = jacobian(case, state, lam)
    fd = finite_difference_jacobian(case, state, lam)
    tol = np.maximum(1e-6, 1e-4 * np.abs(fd))
    assert np.all(np.abs(jac - fd) <= tol)


class TestMismatch:
    def test_compositional_oracle(self):
        rng = np.random.default_rng(1)
        grid = random_grid(rng, n_nodes=6, n_resource=2, with_shunts=True)
        devices = random_devices(rng, grid)
        case = full_case(grid, devices)
        state = PolarState(
            e=1.0 + 0.1 * rng.random(case.dimension),
            theta=0.2 * rng.normal(size=case.dimension),
        )
        lam = rng.random(2)
        v = state.voltage()
        ds = injected_power(case.y, v) - stack_device_powers(devices, case, v, lam)
        expected = np.concatenate([ds.real, ds.imag])
        assert np.array_equal(mismatch(case, state, lam), expected)

    def test_single_slack_node_degenerate_grid(self):
        # one slack node, no branches: the network injects nothing, and the
        # Thevenin power vanishes at the source voltage
        grid = GridModel(n_phases=3, nodes=[("S", NodeRole.SLACK)], branches=[])
        devices = DeviceSet(
            thevenin={
                "S": TheveninEquivalent(
                    "S",
                    positive_sequence_voltage(3),
                    (0.01 + 0.1j) * np.eye(3),
                )
            },
            polynomial={},
        )
        case = full_case(grid, devices)
        state = PolarState.from_voltage(devices.thevenin["S"].v_source)
        f = mismatch(case, state, np.zeros(0))
        # the polar round trip costs an ulp, so not bitwise zero
        assert np.max(np.abs(f)) < 1e-14
        result = solve_nrm(case, np.zeros(0), init=state)
        assert result.converged and result.iterations == 0

    def test_two_bus_closed_form_solution(self):
        z_line, z_src = 0.03 + 0.09j, 0.001 + 0.01j
        p, q = -0.3, -0.1
        _, _, case = two_bus_case(z_line, p, q, z_src)
        v_load = gauss_two_bus_voltage(z_line + z_src, -(p + 1j * q))
        assert v_load is not None
        i = (1.0 - v_load) / (z_line + z_src)
        v_slack = 1.0 - z_src * i
        state = PolarState.from_voltage(np.array([v_slack, v_load]))
        f = mismatch(case, state, np.ones(1))
        assert np.max(np.abs(f)) < 1e-12


class TestJacobian:
    def test_matches_fd_on_random_grids(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            grid = random_grid(rng, n_nodes=int(rng.integers(3, 7)), with_shunts=True)
            devices = random_devices(rng, grid)
            case = full_case(grid, devices)
            state = PolarState(
                e=1.0 + 0.05 * rng.normal(size=case.dimension),
                theta=0.1 * rng.normal(size=case.dimension),
            )
            lam = rng.random(len(case.resource_nodes))
            assert_jacobian_matches_fd(case, state, lam)

    def test_matches_fd_on_two_bus_voltage_dependent(self):
        _, _, case = two_bus_case(alpha=0.3, beta=0.2)
        state = PolarState(e=np.array([1.0, 0.93]), theta=np.array([0.0, -0.08]))
        assert_jacobian_matches_fd(case, state, np.ones(1))

    def test_constant_power_load_has_no_magnitude_term(self):
        _, devices, case = two_bus_case(alpha=0.0, beta=0.0)
        state = PolarState(e=np.array([1.0, 0.9]), theta=np.zeros(2))
        jac = jacobian(case, state, np.ones(1))
        # resource block: remove the device, the Jacobian must not change
        stripped = DeviceSet(
            thevenin=devices.thevenin,
            polynomial={
                "L": PolynomialModel(
                    node="L",
                    p0=[0.0],
                    q0=[0.0],
                    v0=[1.0],
                    alpha_re=[0.0],
                    beta_re=[0.0],
                    gamma_re=[1.0],
                    alpha_im=[0.0],
                    beta_im=[0.0],
                    gamma_im=[1.0],
                )
            },
        )
        case2 = full_case(case_grid(case), stripped)
        jac2 = jacobian(case2, state, np.ones(1))
        assert np.allclose(jac, jac2)


def case_grid(case):
    # rebuild the grid backing a two-bus case (test helper)
    z = 0.03 + 0.09j
    return GridModel(
        n_phases=1,
        nodes=[("S", NodeRole.SLACK), ("L", NodeRole.RESOURCE)],
        branches=[Branch("S", "L", np.array([[z]]))],
    )


class TestSolveNrm:
    def test_exact_initial_state_converges_immediately(self):
        _, _, case = two_bus_case()
        first = solve_nrm(case, np.ones(1))
        again = solve_nrm(case, np.ones(1), init=first.state)
        assert again.converged
        assert again.iterations <= 1

    def test_two_bus_matches_fixed_point_oracle(self):
        z_line, z_src = 0.03 + 0.09j, 0.001 + 0.01j
        p, q = -0.3, -0.1
        _, _, case = two_bus_case(z_line, p, q, z_src)
        result = solve_nrm(case, np.ones(1))
        assert result.converged
        v_oracle = gauss_two_bus_voltage(z_line + z_src, -(p + 1j * q))
        assert abs(result.voltage()[1] - v_oracle) < 1e-8

    def test_flat_start_positive_sequence(self, test_case):
        state = flat_start(test_case)
        assert np.allclose(state.e, 1.0)
        assert state.theta[0] == pytest.approx(0.0)
        assert state.theta[1] == pytest.approx(-2 * np.pi / 3)
        assert state.theta[2] == pytest.approx(2 * np.pi / 3)

    def test_not_converged_returns_best_state(self):
        _, _, case = two_bus_case()
        result = solve_nrm(case, np.ones(1), max_iter=0)
        assert not result.converged
        assert result.iterations == 0
        assert np.isfinite(result.final_mismatch_inf)

    def test_singular_jacobian_raises(self):
        # two constant-power nodes, no slack: all powers are rotation
        # invariant, so the angle columns of the Jacobian sum to zero
        grid = GridModel(
            n_phases=1,
            nodes=[("A", NodeRole.RESOURCE), ("B", NodeRole.RESOURCE)],
            branches=[Branch("A", "B", np.array([[0.1 + 0.3j]]))],
        )
        pm = {
            n: PolynomialModel(
                node=n,
                p0=[0.1 if n == "A" else -0.1],
                q0=[0.0],
                v0=[1.0],
                alpha_re=[0.0],
                beta_re=[0.0],
                gamma_re=[1.0],
                alpha_im=[0.0],
                beta_im=[0.0],
                gamma_im=[1.0],
            )
            for n in ("A", "B")
        }
        case = full_case(grid, DeviceSet(thevenin={}, polynomial=pm))
        with pytest.raises(SingularJacobianError):
            solve_nrm(case, np.ones(2))

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(3)
        grid = random_grid(rng, n_nodes=6, n_resource=3, with_shunts=True)
        devices = random_devices(rng, grid)
        lam = rng.random(3)
        base = solve_nrm(full_case(grid, devices), lam)
        assert base.converged

        resource = list(grid.resource_nodes)
        zero = list(grid.zero_injection_nodes)
        rng.shuffle(resource)
        rng.shuffle(zero)
        permuted = GridModel(
            n_phases=grid.n_phases,
            nodes=[(n, grid.roles[n]) for n in list(grid.slack_nodes) + resource + zero],
            branches=grid.branches,
            shunts=grid.shunts,
            base=grid.base,
        )
        lam_perm = np.array(
            [lam[list(grid.resource_nodes).index(n)] for n in permuted.resource_nodes]
        )
        other = solve_nrm(full_case(permuted, devices), lam_perm)
        assert other.converged
        assert other.iterations == base.iterations
        v_base = base.voltage()
        v_other = other.voltage()
        for node in grid.nodes:
            assert np.allclose(
                v_base[grid.flat_slice(node)],
                v_other[permuted.flat_slice(node)],
                atol=1e-9,
            )

    def test_power_balance_at_solution(self, test_system, test_case):
        grid, devices = test_system
        lam = loading_from_profile(test_case, 12)
        result = solve_nrm(test_case, lam, compute_condition=False)
        assert result.converged
        v = result.voltage()
        total_injected = injected_power(test_case.y, v).sum()
        absorbed = total_branch_losses(grid, v) + total_shunt_absorption(grid, v)
        assert abs(total_injected - absorbed) < 1e-8

    def test_angle_wrap(self):
        wrapped = wrap_angles(np.array([3 * np.pi, -np.pi, 0.5]))
        assert wrapped[0] == pytest.approx(np.pi)
        assert wrapped[1] == pytest.approx(np.pi)  # open interval at -pi
        assert wrapped[2] == pytest.approx(0.5)


class TestFullVsReduced:
    def test_consistency_across_schedule(self, test_system, test_schedule, test_case):
        grid, devices = test_system
        lam = loading_from_profile(test_case, 12)
        report = full_vs_reduced_consistency(grid, devices, test_schedule, lam)
        assert report.passed
        assert len(report.rows) == 11
        assert report.max_retained_deviation < 1e-8
        assert report.max_interior_deviation < 1e-8

    def test_deviation_scales_with_tolerance(self, test_system, test_schedule, test_case):
        grid, devices = test_system
        lam = loading_from_profile(test_case, 12)
        loose = full_vs_reduced_consistency(
            grid, devices, test_schedule[:4], lam, eps=1e-6, tolerance=1e-4
        )
        assert loose.passed
        assert loose.max_retained_deviation < 1e-4

    def test_reduced_solution_matches_recovered(self, test_system, test_schedule):
        grid, devices = test_system
        case = reduced_case(grid, devices, test_schedule[10])
        assert len(case.zero_injection_nodes) == 0
        assert case.dimension == 48
