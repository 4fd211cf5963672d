"""Relative occlusion and distance detection for object pairs."""

try:
    from ._relocc import *  # noqa: F401,F403
    from ._relocc import __doc__  # noqa: F401
except ImportError:  # in-place build: extension sits on sys.path, not in the package
    from _relocc import *  # noqa: F401,F403
    from _relocc import __doc__  # noqa: F401
