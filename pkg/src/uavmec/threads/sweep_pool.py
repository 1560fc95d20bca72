# src/uavmec/threads/sweep_pool.py

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, Dict, List, Optional, Sequence

logger = logging.getLogger(__name__)


class SweepPool:
    """
    Runs independent sweep cells on a bounded pool of worker processes.

    Results come back in the order of the cells regardless of which worker
    finishes first, so output files do not depend on scheduling.
    """

    def __init__(self, worker: Callable[[Any], Dict[str, Any]], cells: Sequence[Any],
                 max_workers: int = 1):
        if max_workers < 1:
            raise ValueError("max_workers must be at least 1")
        self.worker = worker
        self.cells = list(cells)
        self.max_workers = max_workers
        self.logger = logging.getLogger(__name__)

    def run(self, update_progress: Optional[Callable[[int], None]] = None,
            update_log: Optional[Callable[[str], None]] = None) -> List[Dict[str, Any]]:
        total = len(self.cells)
        results: List[Optional[Dict[str, Any]]] = [None] * total
        if total == 0:
            return []

        def finished(index: int, done: int) -> None:
            self.logger.info(f"Cell {index + 1}/{total} finished")
            if update_log:
                update_log(f"Finished cell {index + 1}/{total}")
            if update_progress:
                update_progress(int(done / total * 100))

        if self.max_workers == 1:
            for i, cell in enumerate(self.cells):
                results[i] = self.worker(cell)
                finished(i, i + 1)
            return results

        with ProcessPoolExecutor(max_workers=self.max_workers) as executor:
            futures = {executor.submit(self.worker, cell): i for i, cell in enumerate(self.cells)}
            for done, future in enumerate(as_completed(futures), start=1):
                i = futures[future]
                try:
                    results[i] = future.result()
                except Exception as e:
                    self.logger.error(f"Cell {i + 1}/{total} failed: {e}")
                    raise
                finished(i, done)
        return results


def run_cells(worker: Callable[[Any], Dict[str, Any]], cells: Sequence[Any], max_workers: int = 1,
              update_progress: Optional[Callable[[int], None]] = None,
              update_log: Optional[Callable[[str], None]] = None) -> List[Dict[str, Any]]:
    return SweepPool(worker, cells, max_workers).run(update_progress, update_log)
