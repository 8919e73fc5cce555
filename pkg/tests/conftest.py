import pytest
from hypothesis import HealthCheck, settings

from badseq.family import BuildConfig, StepParams, build_family
from badseq.residues import SequenceSpec
from badseq.verify import default_psi

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SQUARES = SequenceSpec("power", 2)
PRIMES = SequenceSpec("prime")


@pytest.fixture(scope="session")
def fam111():
    return build_family(1, 1, StepParams(), BuildConfig())


@pytest.fixture(scope="session")
def fam122():
    return build_family(1, 2, StepParams(), BuildConfig())


@pytest.fixture(scope="session")
def psi122(fam122):
    return default_psi(fam122)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE: dict = {}


def record_criterion(n: int, passed: bool, detail: str) -> str:
    line = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
