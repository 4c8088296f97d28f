from __future__ import annotations

import pytest

from nodelife.params import derive, desk_defaults, table_defaults


@pytest.fixture
def params():
    return table_defaults()


@pytest.fixture
def derived(params):
    return derive(params)


@pytest.fixture
def desk():
    return desk_defaults()
