"""AV scan-report tagging primitives backed by the native extension."""

try:
    from avtag._avtag import *  # noqa: F401,F403
    from avtag._avtag import __doc__  # noqa: F401
except ImportError:  # running against a build tree: _avtag is on sys.path
    from _avtag import *  # noqa: F401,F403
    from _avtag import __doc__  # noqa: F401
