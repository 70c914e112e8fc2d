"""Hot response-map kernels with backend selection at import time.

The compiled extension is used when it importable; otherwise the numpy
fallback takes over.  ``D2CIP_KERNELS=python|cython`` forces a backend
(useful for benchmarking and parity tests); forcing ``cython`` raises if the
extension is missing.
"""

import os

_forced = os.environ.get("D2CIP_KERNELS", "").strip().lower()

if _forced == "python":
    from d2cip.kernels import _fallback as _impl
    BACKEND = "python"
else:
    try:
        from d2cip.kernels import _core as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        from d2cip.kernels import _fallback as _impl
        BACKEND = "python"

cell_noise = _impl.cell_noise
gauss_response_maps = _impl.gauss_response_maps
render_intensity = _impl.render_intensity
patch_offsets = _impl.patch_offsets
extract_patch = _impl.extract_patch
ncc_response_maps = _impl.ncc_response_maps

__all__ = [
    "BACKEND",
    "cell_noise",
    "gauss_response_maps",
    "render_intensity",
    "patch_offsets",
    "extract_patch",
    "ncc_response_maps",
]
