"""Rejection rates under H0 for all panels and alpha values.

Desk scale by default; pass ``--reps 5000 --B 999`` for full scale.
"""

from _tables import parse_args, run

ALPHAS = (-1 / 3, -1 / 6, 0.0, 1 / 6, 1 / 3)

if __name__ == "__main__":
    run("size", ALPHAS, parse_args(__doc__))
