"""Classifier-guided reduction of facility-location MILPs for a therapy supply chain."""
