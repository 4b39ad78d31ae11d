"""Motion primitives: learn from demonstrations, repair with corrections,
execute under temporal coupling, detect torque transients."""

try:
    from ._dmpkit import *  # noqa: F401,F403  (wheel layout)
    from . import _dmpkit as _backend
except ImportError:  # in-tree build: the extension sits on sys.path directly
    from _dmpkit import *  # noqa: F401,F403
    import _dmpkit as _backend

__version__ = "0.1.0"
__all__ = [name for name in dir(_backend) if not name.startswith("_")]
