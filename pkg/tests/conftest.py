import pytest

from cohtrap import BathSpec, ModelConfig
from cohtrap.dynamics import Flavor, build_coefficient_table
from cohtrap.kernels import decay_rate_infinity
from cohtrap.trapping import solve_lambda

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ref_bath():
    return BathSpec(gamma=5.0, omega0=10.0, temperature=100.0)


@pytest.fixture(scope="session")
def lambda_star(ref_bath):
    return solve_lambda(ref_bath).lambda_star


@pytest.fixture(scope="session")
def ref_model(lambda_star):
    return ModelConfig(lam=lambda_star)


@pytest.fixture(scope="session")
def tau_s(ref_model, ref_bath):
    return 1.0 / decay_rate_infinity(ref_model, ref_bath)


@pytest.fixture(scope="session")
def ref_table(ref_model, ref_bath, tau_s):
    return build_coefficient_table(ref_model, ref_bath, 50.0 * tau_s)


@pytest.fixture(scope="session")
def ref_rwa_table(ref_model, ref_bath, tau_s):
    # 50 RWA relaxation times 2 / Gamma_RWA(inf), Gamma_RWA(inf) = Gamma(inf)
    return build_coefficient_table(ref_model, ref_bath, 100.0 * tau_s, flavor=Flavor.RWA)


@pytest.fixture(scope="session")
def acceptance_report():
    def record(number, passed, detail):
        status = "PASS" if passed else "FAIL"
        _ACCEPTANCE_LINES.append(f"[{status}] criterion {number:>2}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
