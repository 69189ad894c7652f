"""Python face of the singular backward-equation library.

Everything is implemented in the compiled extension; this package only
re-exports it. The extension lives next to this package when installed and
on PYTHONPATH when run from a build tree, so both layouts are tried.
"""

try:
    from ._sbsde import *  # noqa: F401,F403
    from ._sbsde import __doc__, __version__  # noqa: F401
except ImportError:
    from _sbsde import *  # noqa: F401,F403
    from _sbsde import __doc__, __version__  # noqa: F401
