"""Static mining of metamorphic relations from unit tests.

Pipeline: parse MiniTest sources into a straight-line IR, detect test cases
that encode a metamorphic relation (two invocations of one internal class
linked by a relation assertion), codify each relation as a parameterized
method, and grade the result by executing it on generated inputs.
"""

from .ir import IR_VERSION

__version__ = "1.0.0"

__all__ = ["IR_VERSION", "__version__"]
