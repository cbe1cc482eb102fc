import pytest

from riskcost.domain import ChallengeModel, CostParameters
from riskcost.policy import PolicyConfig
from riskcost.simulator import AdversaryConfig, GaussianScore, Scenario


@pytest.fixture
def small_scenario():
    return Scenario(
        impostor_prior=0.2,
        legit_score=GaussianScore(-1.0, 1.0),
        impostor_score=GaussianScore(1.0, 1.0),
        adversary=AdversaryConfig(probe_step_size=0.2, probe_batch=5),
        challenge=ChallengeModel(0.9, 1.0, 1.0),
        horizon=300,
        replications=2,
        seed=11,
        calibration_samples=500,
    )


@pytest.fixture
def small_config():
    return PolicyConfig(costs=CostParameters(100, 10, 1, 0.1), beta=0.1, alpha=0.9,
                        window=100, reoptimize_every=50)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
