"""Clifford-algebra Moebius maps on spheres and the fractals their random iteration draws."""

from __future__ import annotations

__version__ = "0.1.0"
