"""Tests for evrp-vns."""
