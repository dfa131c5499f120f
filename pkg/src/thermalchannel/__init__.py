"""Thermal quantum channels: channel entropies, maximum-entropy channels and learning."""
