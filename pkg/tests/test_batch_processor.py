"""
Tests for the worker-thread job runner
"""

import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from section_labeler.errors import AnnotationError, SectionLabelerError
from section_labeler.utils.batch_processor import run_in_workers


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(), max_size=8), st.integers(1, 4))
def test_results_keep_submission_order(values, workers):
    tasks = {f"job-{i}": (lambda v=v: v * 2) for i, v in enumerate(values)}
    results = run_in_workers(tasks, workers)
    assert list(results) == list(tasks)
    assert list(results.values()) == [v * 2 for v in values]


def test_concurrency_is_bounded():
    lock = threading.Lock()
    running = {"now": 0, "peak": 0}

    def job():
        with lock:
            running["now"] += 1
            running["peak"] = max(running["peak"], running["now"])
        time.sleep(0.02)
        with lock:
            running["now"] -= 1

    run_in_workers({f"job-{i}": job for i in range(6)}, max_workers=2)
    assert 1 <= running["peak"] <= 2


@pytest.mark.parametrize("workers", [1, 3])
def test_failures_name_the_task_after_all_jobs_finish(workers):
    finished = []

    def ok(name):
        def job():
            finished.append(name)
            return name
        return job

    def broken():
        raise AnnotationError("bad offsets")

    tasks = {"a": ok("a"), "b": broken, "c": ok("c")}
    with pytest.raises(AnnotationError, match="b: bad offsets"):
        run_in_workers(tasks, workers)
    assert sorted(finished) == ["a", "c"]


def test_foreign_exceptions_are_wrapped():
    def broken():
        raise ZeroDivisionError("boom")

    with pytest.raises(SectionLabelerError, match="fold-2"):
        run_in_workers({"fold-1": lambda: 1, "fold-2": broken}, 2)
    assert run_in_workers({}, 3) == {}
