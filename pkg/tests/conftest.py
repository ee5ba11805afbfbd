"""Session fixtures: the expensive series bundles are built once."""

import pytest

from trigrmat.central import truncated_eval_rep
from trigrmat.coeffring import SeriesWindow
from trigrmat.normalizer import build_gseries
from trigrmat.rmatrix import build_bundle

WIDE = SeriesWindow(-8, 6, 6)


@pytest.fixture(scope="session")
def gs2():
    return build_gseries(2, WIDE)


@pytest.fixture(scope="session")
def gs3():
    return build_gseries(3, WIDE)


@pytest.fixture(scope="session")
def bundle2(gs2):
    return build_bundle(2, SeriesWindow(-8, 6, 4), gs=gs2)


@pytest.fixture(scope="session")
def bundle3(gs3):
    return build_bundle(3, SeriesWindow(-8, 6, 4), gs=gs3)


@pytest.fixture(scope="session")
def rep2():
    return truncated_eval_rep(2, SeriesWindow(-8, 8, 4))
