"""Benchmark harness for streaming IoT dataflows."""

__version__ = "0.1.0"
