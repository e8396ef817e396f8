"""Kernel backend selection.

The compiled extension is used when importable; ``IPSAE_BACKEND=python``
forces the numpy fallback.
"""
import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

NAME = "python"
kernels = _fallback

if os.environ.get("IPSAE_BACKEND", "").lower() not in ("python", "numpy", "fallback"):
    try:
        from . import _kernels as kernels  # noqa: F811
        NAME = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        log.debug("compiled kernels unavailable, using numpy fallback")

gauss_solve = kernels.gauss_solve
silhouette_samples = kernels.silhouette_samples
