"""
Cache key generation for bench runs.

A run request names the instance (by content digest), the search setup and
the stop condition. The seeds are NOT part of the key: results are stored
per seed under one key, so a bench extended from 5 to 20 runs only computes
the 15 missing seeds.
"""

import copy
import hashlib
import json
from typing import Any, Dict, List

from .instance import Instance, format_instance


def instance_digest(inst: Instance) -> str:
    """SHA256 of the instance in the competition text format."""
    return hashlib.sha256(format_instance(inst).encode("utf-8")).hexdigest()


def normalize_request(request_data: Dict[str, Any]) -> Dict[str, Any]:
    """
    Canonical form of a run request: every field except ``seeds``.

    Raises:
        ValueError: If the ``instance`` digest is missing; results of
            different instances must never share a key
    """
    if "instance" not in request_data:
        raise ValueError("The 'instance' field is required in every run request.")
    normalized = copy.deepcopy(request_data)
    normalized.pop("seeds", None)
    return normalized


def generate_cache_key(request_data: Dict[str, Any]) -> str:
    normalized = normalize_request(request_data)
    json_str = json.dumps(normalized, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(json_str.encode("utf-8")).hexdigest()


def extract_seeds(request_data: Dict[str, Any]) -> List[int]:
    """Seeds requested, in order; ``[1]`` when none are given."""
    return [int(s) for s in request_data.get("seeds", [1])]
