"""RL->SFT->RL pedagogical training pipeline, C++ core with python bindings."""

try:
    from ._core import *  # noqa: F401,F403  (installed wheel layout)
except ImportError:  # pragma: no cover - source builds put _core on sys.path
    from _core import *  # noqa: F401,F403
