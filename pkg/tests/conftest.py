import pytest

from plcheck.policy import BUSINESS, CONSENT, parse_policy
from plcheck.vocab import DATA_DIR, load_vocabulary_file

EXAMPLES = DATA_DIR / "examples"


def example(name: str):
    kind = CONSENT if name.endswith(".pol") else BUSINESS
    return parse_policy((EXAMPLES / name).read_text(), kind)


@pytest.fixture(scope="session")
def befit():
    return load_vocabulary_file("befit")


@pytest.fixture(scope="session")
def gdpr_voc():
    return load_vocabulary_file("gdpr")
