import random

import pytest

from toys import two_rom_toy


@pytest.fixture
def rng():
    return random.Random(20240901)


@pytest.fixture
def toy_scenario():
    return two_rom_toy()
