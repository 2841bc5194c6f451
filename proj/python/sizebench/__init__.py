"""Position sizing, VaR backtesting and factor analysis toolkit.

Thin re-export of the compiled extension. When installed as a wheel the
extension lives inside this package; in a development tree it sits on the
path next to it (point PYTHONPATH at the CMake build directory).
"""

try:
    from ._sizebench import *  # noqa: F401,F403
    from ._sizebench import __doc__ as _doc
except ImportError:
    from _sizebench import *  # noqa: F401,F403
    from _sizebench import __doc__ as _doc

__doc__ = _doc or __doc__
__version__ = "0.1.0"
