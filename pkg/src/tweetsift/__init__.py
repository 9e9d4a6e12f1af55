"""Corpus analytics for social-media health posts.

Sifting, hedonometric scoring, word shifts, two-stage text classification
and a rate-capped feed simulator.
"""

__version__ = "0.1.0"
