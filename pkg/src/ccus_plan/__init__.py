"""Electricity-gas planning with carbon capture and power-to-gas."""
