# conftest.py

import os
import sys

import pytest
from pubsub import pub

# modules live at the repository root, next to main.py
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run the long acceptance reproductions')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running acceptance reproduction, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def events():
    """Collects pubsub messages on the adapter / auxiliary / run topics for one test."""
    received: list[tuple[str, dict]] = []

    def listener(topic=pub.AUTO_TOPIC, **kwargs):
        received.append((topic.getName(), kwargs))

    pub.subscribe(listener, pub.ALL_TOPICS)
    yield received
    pub.unsubscribe(listener, pub.ALL_TOPICS)
