"""Tests for the worker pool and logging setup."""

import logging

import pytest

from core.logging_setup import setup_logging
from core.workers import get_default_threads, parallel_map, set_default_threads


@pytest.fixture
def restore_threads():
    previous = get_default_threads()
    yield
    set_default_threads(previous)


class TestParallelMap:
    def test_order_is_kept(self):
        items = list(range(50))
        assert parallel_map(lambda i: i * i, items, threads=4) == [i * i for i in items]

    def test_default_threads(self, restore_threads):
        set_default_threads(3)
        assert get_default_threads() == 3
        assert parallel_map(str, iter(range(5))) == ["0", "1", "2", "3", "4"]

    def test_thread_count_floor(self, restore_threads):
        set_default_threads(0)
        assert get_default_threads() == 1

    def test_errors_propagate(self):
        def fail(i):
            if i == 3:
                raise ValueError("bad item")
            return i

        with pytest.raises(ValueError, match="bad item"):
            parallel_map(fail, range(6), threads=2)


class TestLogging:
    @pytest.fixture(autouse=True)
    def quiet_afterwards(self):
        yield
        setup_logging(0)

    @pytest.mark.parametrize("verbosity,level", [(0, logging.WARNING), (1, logging.INFO), (2, logging.DEBUG), (5, logging.DEBUG)])
    def test_levels(self, verbosity, level):
        root = setup_logging(verbosity)
        assert root.level == level

    def test_single_handler(self):
        setup_logging(0)
        setup_logging(1)
        ours = [h for h in logging.getLogger().handlers if getattr(h, "_cocycle_lab", False)]
        assert len(ours) == 1
