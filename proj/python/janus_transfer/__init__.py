"""Planning, erasure-coding, and simulation primitives for resilient
transfer of hierarchically refined datasets over lossy links.

The heavy lifting lives in the compiled extension ``_janus_core``; this
package re-exports its public surface.  The extension is found either as a
submodule (installed wheel) or on ``PYTHONPATH`` (build tree).
"""

try:  # installed wheel layout: janus_transfer/_janus_core.*.so
    from . import _janus_core as _core
except ImportError:  # build tree: extension directory on PYTHONPATH
    import _janus_core as _core

_public = [_name for _name in dir(_core) if not _name.startswith("_")]
globals().update({_name: getattr(_core, _name) for _name in _public})

__all__ = list(_public)
__version__ = _core.__version__
