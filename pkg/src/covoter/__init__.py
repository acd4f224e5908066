"""Voter models on dense dynamic random graphs."""
