import pytest

from kanforecast.data import write_csv
from kanforecast.synthetic import synthetic_series


@pytest.fixture(scope="session")
def station_csv(tmp_path_factory):
    """A well-formed 5115-day station file."""
    path = tmp_path_factory.mktemp("stations") / "station.csv"
    write_csv(synthetic_series(5115, seed=0), path)
    return path
