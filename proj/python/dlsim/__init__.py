"""Compute-budgeted inference planning and simulation for diffusion LLMs.

Thin wrapper over the C++ extension. Supports both the installed-wheel
layout (extension inside the package) and in-tree test runs (extension on
sys.path next to the build directory).
"""

try:
    from ._dlsim import *  # noqa: F401,F403
    from ._dlsim import __version__  # noqa: F401
except ImportError:  # in-tree: extension built by CMake, not installed
    from _dlsim import *  # noqa: F401,F403
    from _dlsim import __version__  # noqa: F401
