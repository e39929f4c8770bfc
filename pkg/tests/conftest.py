import pytest

from iabplan.scenario import build_grid_scenario


@pytest.fixture(scope="session")
def default_scenario():
    """The standard 1 km^2 five-dice instance (400 grid points)."""
    return build_grid_scenario("five_dice")


@pytest.fixture(scope="session")
def toy_scenario():
    """6x6 grid, five-dice donors: small enough for exhaustive checks."""
    return build_grid_scenario("five_dice", (300.0, 300.0), 50.0)


@pytest.fixture(scope="session")
def single_donor_toy():
    """6x6 grid with one central donor (35 candidates)."""
    return build_grid_scenario("single", (300.0, 300.0), 50.0)
