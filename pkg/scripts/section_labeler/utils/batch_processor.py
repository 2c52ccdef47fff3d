"""
Batch processing utility for independent training and loading jobs

This module runs independent, CPU-bound jobs (base-model training,
cross-validation folds, per-file corpus loading) on worker threads.
"""

import asyncio
import logging
import time
from typing import Any, Callable, Dict, List, Mapping

from ..errors import SectionLabelerError

logger = logging.getLogger(__name__)


async def process_task(name: str, fn: Callable[[], Any], semaphore: asyncio.Semaphore) -> Dict[str, Any]:
    """Run a single job on a worker thread

    Args:
        name (str): Name of the job, used in results and errors
        fn (callable): Zero-argument callable to execute
        semaphore (asyncio.Semaphore): Bounds the number of concurrent threads

    Returns:
        dict: Job result with metadata
    """
    async with semaphore:
        started = time.time()
        try:
            result = await asyncio.to_thread(fn)
            logger.debug("Task %s finished in %.2fs", name, time.time() - started)
            return {"name": name, "result": result, "success": True}
        except Exception as e:
            logger.error("Error in task %s: %s", name, e)
            return {"name": name, "result": None, "success": False, "error": e}


async def process_in_batches(tasks: Mapping[str, Callable[[], Any]],
                             max_workers: int = 3) -> List[Dict[str, Any]]:
    """Process jobs in parallel on at most ``max_workers`` threads

    Args:
        tasks (dict): Job name -> zero-argument callable
        max_workers (int): Maximum number of concurrently running jobs

    Returns:
        list: Job results with metadata, in submission order
    """
    semaphore = asyncio.Semaphore(max(1, max_workers))
    pending = [asyncio.create_task(process_task(name, fn, semaphore)) for name, fn in tasks.items()]
    return await asyncio.gather(*pending)


def combine_task_results(results: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Combine job results into a name -> result mapping

    Raises the first failure (by submission order) once every job is done.
    """
    failures = [r for r in results if not r["success"]]
    if failures:
        first = failures[0]
        error = first["error"]
        names = ", ".join(r["name"] for r in failures)
        if isinstance(error, SectionLabelerError):
            raise type(error)(f"{first['name']}: {error}") from error
        raise SectionLabelerError(f"Worker task(s) failed: {names}: {error}") from error
    return {r["name"]: r["result"] for r in results}


def run_in_workers(tasks: Mapping[str, Callable[[], Any]], max_workers: int = 3) -> Dict[str, Any]:
    """Synchronous wrapper that runs jobs on worker threads and collects results

    Args:
        tasks (dict): Job name -> zero-argument callable
        max_workers (int): Maximum number of worker threads

    Returns:
        dict: Job name -> result, in submission order
    """
    if not tasks:
        return {}
    if max_workers <= 1 or len(tasks) == 1:
        results = []
        for name, fn in tasks.items():
            try:
                results.append({"name": name, "result": fn(), "success": True})
            except Exception as e:
                logger.error("Error in task %s: %s", name, e)
                results.append({"name": name, "result": None, "success": False, "error": e})
        return combine_task_results(results)
    return combine_task_results(asyncio.run(process_in_batches(tasks, max_workers)))
