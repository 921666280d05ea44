"""
Bench result cache.

Results live in memory keyed by run request (see hashing.py), one entry per
seed, and are persisted asynchronously to a JSONL file.
"""

import json
import logging
import os
import queue
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .hashing import extract_seeds, generate_cache_key

logger = logging.getLogger(__name__)

DEFAULT_CACHE_DIR = "~/.evrp_vns_cache"
CACHE_DIR_ENV = "EVRP_CACHE_DIR"

RunResult = Dict[str, Any]


class ResultCache:
    """
    Per-seed run results with in-memory storage and async file persistence.

    Thread-safe; the bench harness calls it from the main thread while the
    writer thread flushes to disk.
    """

    def __init__(self, cache_dir: Optional[str] = None, overwrite: bool = False):
        """
        Args:
            cache_dir: Directory of the cache file; defaults to $EVRP_CACHE_DIR
                or ~/.evrp_vns_cache
            overwrite: If True, remove the existing cache file before loading
        """
        if cache_dir is None:
            cache_dir = os.environ.get(CACHE_DIR_ENV, DEFAULT_CACHE_DIR)

        self.cache_dir = Path(os.path.expanduser(cache_dir))
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.cache_file = self.cache_dir / "results.jsonl"

        self._cache: Dict[str, Dict[int, RunResult]] = {}
        self._lock = threading.Lock()

        self._write_queue: queue.Queue = queue.Queue()
        self._writer_thread: Optional[threading.Thread] = None
        self._shutdown = threading.Event()

        self._hits = 0
        self._misses = 0

        if overwrite and self.cache_file.exists():
            self.cache_file.unlink()
            logger.info("Removed existing cache file: %s", self.cache_file)

        self._load_cache()
        self._start_writer()

    def _load_cache(self):
        if not self.cache_file.exists():
            return
        try:
            with open(self.cache_file, "r") as f:
                for line in f:
                    if line.strip():
                        entry = json.loads(line)
                        self._cache[entry["cache_key"]] = {int(s): r for s, r in entry["results"].items()}
            logger.info("Loaded %d cached run setups from %s", len(self._cache), self.cache_file)
        except (OSError, ValueError, KeyError) as e:
            logger.warning("Failed to load cache from %s: %s", self.cache_file, e)

    def _start_writer(self):
        self._writer_thread = threading.Thread(target=self._writer_loop, daemon=True)
        self._writer_thread.start()

    def _writer_loop(self):
        while not self._shutdown.is_set() or not self._write_queue.empty():
            try:
                cache_key, results = self._write_queue.get(timeout=0.2)
            except queue.Empty:
                continue
            try:
                self._write_to_disk(cache_key, results)
            finally:
                self._write_queue.task_done()

    def _write_to_disk(self, cache_key: str, results: Dict[int, RunResult]):
        """Rewrite the cache file with one entry replaced, via a temp file and rename."""
        try:
            existing: Dict[str, Dict[str, RunResult]] = {}
            if self.cache_file.exists():
                with open(self.cache_file, "r") as f:
                    for line in f:
                        if line.strip():
                            entry = json.loads(line)
                            existing[entry["cache_key"]] = entry["results"]

            existing[cache_key] = {str(seed): result for seed, result in results.items()}

            temp_file = self.cache_file.with_suffix(".tmp")
            with open(temp_file, "w") as f:
                for key, entry_results in existing.items():
                    f.write(json.dumps({"cache_key": key, "results": entry_results}) + "\n")
            temp_file.replace(self.cache_file)
        except (OSError, ValueError) as e:
            logger.warning("Failed to write cache to disk: %s", e)

    def get(self, request_data: Dict) -> Tuple[Dict[int, RunResult], List[int]]:
        """
        Cached results for the requested seeds.

        A request counts as a hit when at least one of its seeds is cached.

        Returns:
            (cached results by seed, seeds still to run)
        """
        cache_key = generate_cache_key(request_data)
        seeds = extract_seeds(request_data)
        with self._lock:
            stored = self._cache.get(cache_key, {})
            cached = {seed: dict(stored[seed]) for seed in seeds if seed in stored}
            missing = [seed for seed in seeds if seed not in stored]
            if cached:
                self._hits += 1
            else:
                self._misses += 1
        return cached, missing

    def put(self, request_data: Dict, new_results: Dict[int, RunResult]):
        """Store results by seed; the disk write happens asynchronously."""
        if not new_results:
            return
        cache_key = generate_cache_key(request_data)
        with self._lock:
            entry = self._cache.setdefault(cache_key, {})
            entry.update({int(seed): dict(result) for seed, result in new_results.items()})
            snapshot = dict(entry)
        self._write_queue.put((cache_key, snapshot))

    def clear(self):
        with self._lock:
            self._cache.clear()
            self._hits = 0
            self._misses = 0
        if self.cache_file.exists():
            self.cache_file.unlink()

    def get_stats(self) -> Dict:
        with self._lock:
            lookups = self._hits + self._misses
            return {
                "num_keys": len(self._cache),
                "total_results": sum(len(v) for v in self._cache.values()),
                "hits": self._hits,
                "misses": self._misses,
                "hit_rate": self._hits / lookups if lookups else 0.0,
                "cache_file": str(self.cache_file),
                "pending_writes": self._write_queue.qsize(),
            }

    def flush(self):
        """Block until every queued write has reached the disk."""
        self._write_queue.join()

    def shutdown(self):
        """Flush pending writes and stop the writer thread."""
        self.flush()
        self._shutdown.set()
        if self._writer_thread and self._writer_thread.is_alive():
            self._writer_thread.join(timeout=2.0)
