"""Transformer weight synthesis for maxout, ReLU and CPWL networks."""
