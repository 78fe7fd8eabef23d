"""Trace-driven cache simulation with hazard-rate-trained eviction.

The heavy lifting lives in the compiled ``_hrcache`` extension. Installed
wheels ship the extension inside this package; when running against a plain
CMake build tree, the module sits on PYTHONPATH instead.
"""

try:
    from ._hrcache import *  # noqa: F401,F403
    from ._hrcache import __doc__ as _core_doc
except ImportError:
    from _hrcache import *  # noqa: F401,F403
    from _hrcache import __doc__ as _core_doc

__doc__ = _core_doc or __doc__
