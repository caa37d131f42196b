"""lorentzlab: numerical laboratory for SO(n,1) structure, spherical
complementary-series branching, shearing estimates, time-change algebra,
and renormalization cascades."""

__all__ = [
    "liealg",
    "harmonics",
    "reps",
    "shearing",
    "timechange",
    "renorm",
    "cli",
    "errors",
]

__version__ = "0.1.0"
