"""
Unit tests for cache key generation and request normalization.
"""

import pytest

from evrp_vns.hashing import extract_seeds, generate_cache_key, instance_digest, normalize_request
from evrp_vns.instance import format_instance, parse_instance


def _request(**changes):
    request = {
        "instance": "ab" * 32,
        "p": 2,
        "r": 0.35,
        "construction": "c:14",
        "ls": "110",
        "count_delta_evaluations": False,
        "size_basis": "nodes",
        "stop": "evals:1000",
        "seeds": [1, 2, 3],
    }
    request.update(changes)
    return request


class TestNormalization:
    """Test request normalization."""

    def test_normalize_excludes_seeds(self):
        """Test that the seeds are dropped and everything else kept."""
        normalized = normalize_request(_request())
        assert "seeds" not in normalized
        assert normalized["construction"] == "c:14"
        assert normalized["stop"] == "evals:1000"

    def test_normalize_does_not_mutate(self):
        """Test that the caller's request is left alone."""
        request = _request()
        normalize_request(request)
        assert request["seeds"] == [1, 2, 3]

    def test_instance_required(self):
        """Test that a request without an instance digest is rejected."""
        request = _request()
        del request["instance"]
        with pytest.raises(ValueError, match="instance"):
            normalize_request(request)


class TestCacheKey:
    """Test cache key generation."""

    def test_same_request_same_key(self):
        """Same request should generate same cache key."""
        assert generate_cache_key(_request()) == generate_cache_key(_request())

    def test_different_seeds_same_key(self):
        """Different seed lists should generate same cache key."""
        assert generate_cache_key(_request(seeds=[1])) == generate_cache_key(_request(seeds=list(range(1, 21))))

    def test_key_order_irrelevant(self):
        """Dict insertion order should not matter."""
        request = _request()
        reordered = dict(reversed(list(request.items())))
        assert generate_cache_key(request) == generate_cache_key(reordered)

    @pytest.mark.parametrize(
        "field, value",
        [
            ("instance", "cd" * 32),
            ("p", 3),
            ("r", 0.5),
            ("construction", "c:0"),
            ("ls", "111"),
            ("count_delta_evaluations", True),
            ("stop", "time:10s"),
        ],
    )
    def test_setup_changes_key(self, field, value):
        """Any setup field should change the cache key."""
        assert generate_cache_key(_request()) != generate_cache_key(_request(**{field: value}))

    def test_key_is_hex_string(self):
        """Cache key should be a valid hex string."""
        key = generate_cache_key(_request())
        assert isinstance(key, str)
        assert len(key) == 64
        int(key, 16)


class TestSeeds:
    """Test seed extraction."""

    def test_extract(self):
        """Test that seeds come back as ints in order."""
        assert extract_seeds(_request(seeds=["3", 1])) == [3, 1]

    def test_default(self):
        """Test the single default seed."""
        request = _request()
        del request["seeds"]
        assert extract_seeds(request) == [1]


class TestInstanceDigest:
    """Test instance content hashing."""

    def test_digest_follows_content(self, small_instance):
        """Test that equal content hashes equal and any change alters the digest."""
        same = parse_instance(format_instance(small_instance))
        assert instance_digest(same) == instance_digest(small_instance)
        changed = parse_instance(format_instance(small_instance).replace("CAPACITY: 10", "CAPACITY: 12"))
        assert instance_digest(changed) != instance_digest(small_instance)
