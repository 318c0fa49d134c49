from pathlib import Path

import pytest

from routemap import CanonicalPath, TopoMap
from routemap.envsim import toy_environment

FIXTURES = Path(__file__).parent / "fixtures"

W1_TEXT = "Depart from n1 to n2. Then, turn right and proceed to n3."
W2_TEXT = "Depart from n1 to n2. Then, proceed to n4. Then, turn left and proceed to n5."
W1 = CanonicalPath(["n1", "n2", "n3"], ["R"])
W2 = CanonicalPath(["n1", "n2", "n4", "n5"], ["F", "L"])
TOY_ANSWER = "Depart from n5 to n4. Then, turn right and proceed to n2. Then, turn left and proceed to n3."


@pytest.fixture
def toy_map():
    return TopoMap.from_paths([W1, W2])


@pytest.fixture
def toy_env():
    return toy_environment()
CONFIG_URL = "https://llm.invalid/v1"
