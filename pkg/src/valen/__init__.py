"""Valen: a probability-highlighting solver for mini-RPM and mini-Bongard
puzzles, together with three solution-distribution planning methods
(tine, funny, sbr) and a desk-scale procedural dataset generator."""

__version__ = "0.1.0"
