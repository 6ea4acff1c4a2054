"""Numerical tolerances shared by every module."""

#: Absolute tolerance on model identities (hyperboloid constraint, distance(p, p)).
MODEL_TOL = 1e-9

#: Relative tolerance for metric symmetry checks.
SYMMETRY_RTOL = 1e-12

#: Slack added to vantage-point pruning bounds so rounding never drops a neighbour.
PRUNE_SLACK = 1e-9

#: Expected point count above which sampling refuses to run.
MAX_EXPECTED_POINTS = 1e8

#: Two-sided 95% normal quantile used by Wilson intervals.
WILSON_Z = 1.959963984540054

#: Significant digits for every float written to CSV.
FLOAT_DIGITS = 17
