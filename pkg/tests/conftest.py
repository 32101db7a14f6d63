import json
import pathlib

import pytest

from vkpush.abelianization import AbelianizationMap
from vkpush.presentation import Presentation
from vkpush.scheme import PushingScheme

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def _load_bundle(name: str) -> tuple[Presentation, AbelianizationMap, PushingScheme]:
    obj = json.loads((FIXTURES / f"{name}.json").read_text())
    p = Presentation.from_json_dict(obj["presentation"])
    m = AbelianizationMap.from_json_dict(obj["map"], p)
    s = PushingScheme.from_json_dict(obj["scheme"], p, m)
    return p, m, s


@pytest.fixture(scope="session")
def z2_bundle():
    return _load_bundle("z2")


@pytest.fixture(scope="session")
def heisenberg_bundle():
    return _load_bundle("heisenberg")
