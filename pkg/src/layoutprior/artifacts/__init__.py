"""Artifacts package: checkpoints, digests, run config, metrics log, rendering."""
