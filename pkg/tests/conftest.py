from pathlib import Path

import pytest

import dqcsim
from dqcsim import ghz_circuit, parse_network
from dqcsim.experiment import parse_placement_file

EXAMPLE_DIR = dqcsim.example_dir("ghz5-2qpu")


@pytest.fixture(scope="session")
def ghz5_net():
    return parse_network((EXAMPLE_DIR / "network.net").read_text())


@pytest.fixture(scope="session")
def ghz5():
    return ghz_circuit(5)


@pytest.fixture(scope="session")
def paper_placement(ghz5_net):
    return parse_placement_file((EXAMPLE_DIR / "paper.placement").read_text(), ghz5_net.qpus)
