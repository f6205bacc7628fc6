"""Inference and learning in semi-qualitative probabilistic networks."""
