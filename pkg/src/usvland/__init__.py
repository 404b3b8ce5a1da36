"""Landing a multirotor on an oscillating deck: deck-motion estimation, landing MPC, simulation harness."""

__version__ = "0.1.0"
