"""Relativistic few-body quantum mechanics with Poincare-invariant mass operators.

Modules: numerics, kinematics, irreps, clebsch, twobody, threebody, cli.
"""

from __future__ import annotations

from . import clebsch, errors, irreps, kinematics, numerics, threebody, twobody

__version__ = "0.1.0"

__all__ = ["clebsch", "errors", "irreps", "kinematics", "numerics", "threebody", "twobody", "__version__"]
