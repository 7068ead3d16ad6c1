import numpy as np
import pytest

from levicore import sets2d
from levicore.core import CoreParams, analyze_boundary, compute_core
from levicore.hartogs import HartogsDomain, ball_domain

H = 2.0**-9

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  " + "; ".join(d for _, d in parts))


@pytest.fixture(scope="session")
def fat_K():
    return sets2d.cantor_square("1/4")


@pytest.fixture(scope="session")
def fat_domain(fat_K):
    return HartogsDomain.from_set(fat_K, H, name="fat_cantor")


@pytest.fixture(scope="session")
def fat_params():
    return CoreParams(n_z=256, n_theta=4)


@pytest.fixture(scope="session")
def fat_analysis(fat_domain, fat_params):
    s = fat_domain.boundary_sample(fat_params.n_z, fat_params.n_theta, 0, 0)
    return analyze_boundary(fat_domain, s)


@pytest.fixture(scope="session")
def fat_chain(fat_domain, fat_params, fat_analysis):
    return compute_core(fat_domain, fat_params, fat_analysis)


@pytest.fixture(scope="session")
def circle_K():
    return sets2d.Circle(0j, 0.25)


@pytest.fixture(scope="session")
def circle_domain(circle_K):
    return HartogsDomain.from_set(circle_K, H, name="circle")


@pytest.fixture(scope="session")
def circle_params():
    return CoreParams(n_z=256, n_theta=4, k_samples=2000)


@pytest.fixture(scope="session")
def circle_analysis(circle_domain, circle_params):
    s = circle_domain.boundary_sample(circle_params.n_z, circle_params.n_theta, circle_params.k_samples, 0)
    return analyze_boundary(circle_domain, s)


@pytest.fixture(scope="session")
def circle_chain(circle_domain, circle_params, circle_analysis):
    return compute_core(circle_domain, circle_params, circle_analysis)


@pytest.fixture(scope="session")
def ball():
    return ball_domain()


@pytest.fixture(scope="session")
def ball_analysis(ball):
    return analyze_boundary(ball, ball.boundary_sample(64, 4))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
