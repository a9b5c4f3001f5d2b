"""
cstarpert - perturbation of intermediate subalgebras of finite inclusions.

Quasi-bases, Watatani index, the basic construction and the algorithm that
conjugates one close intermediate subalgebra onto another, for inclusions of
matrix algebras.
"""

from cstarpert.core.toolkit import Toolkit

__version__ = "0.1.0"
__all__ = ["Toolkit"]
