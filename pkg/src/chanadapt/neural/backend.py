"""Selects the correlation-kernel backend at import time.

The compiled extension is preferred when present; otherwise the NumPy
implementation is used.  Set ``CHANADAPT_KERNELS=numpy`` or ``=compiled`` to
force a choice (forcing ``compiled`` raises if the extension is missing).
Both backends satisfy the same contracts; they differ only in floating-point
summation order, so cross-backend results agree to rounding error while each
backend on its own is bit-deterministic.
"""

import os

import numpy as np

from . import _convops_np

try:
    from . import _convops
except ImportError:  # pragma: no cover - depends on the build
    _convops = None


def _select():
    choice = os.environ.get("CHANADAPT_KERNELS", "").strip().lower()
    if choice in ("numpy", "python"):
        return _convops_np, "numpy"
    if choice == "compiled":
        if _convops is None:
            raise ImportError(
                "CHANADAPT_KERNELS=compiled but the extension is not built; "
                "run `pip install -e . --no-build-isolation`")
        return _convops, "compiled"
    if choice:
        raise ValueError(f"unknown CHANADAPT_KERNELS value {choice!r}")
    if _convops is not None:
        return _convops, "compiled"
    return _convops_np, "numpy"


_impl, BACKEND_NAME = _select()


def available_backends():
    out = {"numpy": _convops_np}
    if _convops is not None:
        out["compiled"] = _convops
    return out


def _as4d(arr, name):
    a = np.ascontiguousarray(arr)
    if a.ndim != 4:
        raise ValueError(f"{name} must be 4-D (B, C, H, W), got shape {a.shape}")
    if a.dtype not in (np.float32, np.float64):
        raise ValueError(f"{name} must be float32/float64, got {a.dtype}")
    return a


def conv_fwd(x, w, stride=(1, 1), impl=None):
    """Valid cross-correlation of pre-padded x with w, stride (sy, sx)."""
    x = _as4d(x, "x")
    w = _as4d(w, "w")
    if x.dtype != w.dtype:
        raise ValueError("mixed dtypes")
    if x.shape[1] != w.shape[1]:
        raise ValueError(f"channel mismatch: input {x.shape[1]} vs kernel {w.shape[1]}")
    if x.shape[2] < w.shape[2] or x.shape[3] < w.shape[3]:
        raise ValueError(f"kernel {w.shape[2:]} larger than input {x.shape[2:]}")
    return (impl or _impl).conv_fwd(x, w, stride[0], stride[1])


def conv_bwd_input(g, w, in_hw, stride=(1, 1), impl=None):
    """Gradient of conv_fwd w.r.t. its (padded) input of spatial size in_hw."""
    g = _as4d(g, "g")
    w = _as4d(w, "w")
    return (impl or _impl).conv_bwd_input(g, w, stride[0], stride[1],
                                          in_hw[0], in_hw[1])


def conv_bwd_weight(x, g, kernel_hw, stride=(1, 1), impl=None):
    """Gradient of conv_fwd w.r.t. the kernel of spatial size kernel_hw."""
    x = _as4d(x, "x")
    g = _as4d(g, "g")
    return (impl or _impl).conv_bwd_weight(x, g, kernel_hw[0], kernel_hw[1],
                                           stride[0], stride[1])
