import numpy as np
import pytest

from polygrid.case import full_case
from polygrid.devices import DeviceSet, PolynomialModel, TheveninEquivalent
from polygrid.grid import Branch, GridModel, NodeRole, PerUnitBase, Shunt, positive_sequence_voltage
from polygrid.kron import reduction_schedule
from polygrid.testsystem import build_test_system


def random_compound_impedance(rng, n_phases, scale=0.05):
    """Symmetric compound impedance with positive definite real part."""
    a = rng.normal(size=(n_phases, n_phases))
    r = scale * (a @ a.T + n_phases * np.eye(n_phases))
    x = rng.normal(size=(n_phases, n_phases))
    x = scale * (x + x.T)
    return r + 1j * x


def random_compound_shunt(rng, n_phases, scale=1e-3):
    """Purely reactive, symmetric, invertible shunt admittance."""
    b = rng.normal(size=(n_phases, n_phases))
    b = scale * (b @ b.T + n_phases * np.eye(n_phases))
    return 1j * b


def random_grid(rng, n_nodes=6, n_phases=3, n_resource=2, with_shunts=False):
    """Connected random grid: one slack, a few resources, the rest zero-injection."""
    names = [f"N{i}" for i in range(n_nodes)]
    roles = (
        [NodeRole.SLACK]
        + [NodeRole.RESOURCE] * n_resource
        + [NodeRole.ZERO_INJECTION] * (n_nodes - 1 - n_resource)
    )
    nodes = list(zip(names, roles))
    branches = []
    for i in range(1, n_nodes):
        j = int(rng.integers(0, i))  # random tree keeps the graph connected
        branches.append(
            Branch(names[j], names[i], random_compound_impedance(rng, n_phases))
        )
    for _ in range(int(rng.integers(0, 2))):
        i, j = rng.choice(n_nodes, size=2, replace=False)
        branches.append(
            Branch(names[i], names[j], random_compound_impedance(rng, n_phases))
        )
    shunts = []
    if with_shunts:
        for name in rng.choice(names, size=max(1, n_nodes // 3), replace=False):
            shunts.append(Shunt(str(name), random_compound_shunt(rng, n_phases)))
    return GridModel(
        n_phases=n_phases,
        nodes=nodes,
        branches=branches,
        shunts=shunts,
        base=PerUnitBase(10e6, 24.9e3),
    )


def random_devices(rng, grid, load_scale=0.05):
    """Thevenin sources for slacks, mixed polynomial models for resources."""
    thevenin = {}
    for node in grid.slack_nodes:
        z = 0.01 * np.eye(grid.n_phases) + 0.05j * np.eye(grid.n_phases)
        thevenin[node] = TheveninEquivalent(
            node=node, v_source=positive_sequence_voltage(grid.n_phases), z=z
        )
    polynomial = {}
    for k, node in enumerate(grid.resource_nodes):
        sign = -1.0 if k % 2 == 0 else 1.0
        p0 = sign * load_scale * (0.5 + rng.random(grid.n_phases))
        q0 = 0.3 * p0
        split = rng.dirichlet(np.ones(3))
        polynomial[node] = PolynomialModel(
            node=node,
            p0=p0,
            q0=q0,
            v0=np.ones(grid.n_phases),
            alpha_re=np.full(grid.n_phases, split[0]),
            beta_re=np.full(grid.n_phases, split[1]),
            gamma_re=np.full(grid.n_phases, split[2]),
            alpha_im=np.full(grid.n_phases, split[0]),
            beta_im=np.full(grid.n_phases, split[1]),
            gamma_im=np.full(grid.n_phases, split[2]),
        )
    return DeviceSet(thevenin=thevenin, polynomial=polynomial)


def make_pm_free(rng):
    """Random polynomial model with normalized coefficient splits."""
    n_p = int(rng.integers(1, 4))
    split_re = rng.dirichlet(np.ones(3))
    split_im = rng.dirichlet(np.ones(3))
    return PolynomialModel(
        node="R",
        p0=rng.normal(scale=0.2, size=n_p),
        q0=rng.normal(scale=0.1, size=n_p),
        v0=np.full(n_p, 0.9 + 0.2 * rng.random()),
        alpha_re=np.full(n_p, split_re[0]),
        beta_re=np.full(n_p, split_re[1]),
        gamma_re=np.full(n_p, split_re[2]),
        alpha_im=np.full(n_p, split_im[0]),
        beta_im=np.full(n_p, split_im[1]),
        gamma_im=np.full(n_p, split_im[2]),
    )


def two_bus_case(
    z_line=0.03 + 0.09j,
    p_load=-0.3,
    q_load=-0.1,
    z_source=0.001 + 0.01j,
    alpha=0.0,
    beta=0.0,
):
    """Single-phase slack + constant-power (by default) load behind one line."""
    grid = GridModel(
        n_phases=1,
        nodes=[("S", NodeRole.SLACK), ("L", NodeRole.RESOURCE)],
        branches=[Branch("S", "L", np.array([[z_line]]))],
        base=PerUnitBase(10e6, 24.9e3),
    )
    devices = DeviceSet(
        thevenin={
            "S": TheveninEquivalent("S", np.array([1.0 + 0j]), np.array([[z_source]]))
        },
        polynomial={
            "L": PolynomialModel(
                node="L",
                p0=[p_load],
                q0=[q_load],
                v0=[1.0],
                alpha_re=[alpha],
                beta_re=[beta],
                gamma_re=[1.0 - alpha - beta],
                alpha_im=[alpha],
                beta_im=[beta],
                gamma_im=[1.0 - alpha - beta],
            )
        },
    )
    return grid, devices, full_case(grid, devices)


def gauss_two_bus_voltage(z_total, s_consumed, v_source=1.0, tol=1e-14):
    """Load voltage of the two-bus circuit by damped fixed-point iteration.

    Independent of the Newton machinery: iterates V <- V_src - z * conj(S/V)
    with S the consumed power. Returns None when the iteration does not
    settle (load beyond the deliverable limit).
    """
    v = complex(v_source)
    for _ in range(20000):
        nxt = v_source - z_total * np.conj(s_consumed / v)
        if abs(nxt - v) < tol:
            return nxt
        v = 0.5 * v + 0.5 * nxt
    return None


@pytest.fixture(scope="session")
def test_system():
    return build_test_system()


@pytest.fixture(scope="session")
def test_schedule(test_system):
    grid, _ = test_system
    return reduction_schedule(grid, 10)


@pytest.fixture(scope="session")
def test_case(test_system):
    grid, devices = test_system
    return full_case(grid, devices)
