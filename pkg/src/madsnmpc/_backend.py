"""Selects the compiled rocket kernel or the pure-Python path at import.

Set ``MADSNMPC_PURE_PYTHON=1`` to ignore the compiled extension.
"""

from __future__ import annotations

import os

STATUS = {
    0: "ok",
    1: "terminal event did not occur before t_max",
    2: "step size underflow",
    3: "exceeded max_steps",
    4: "non-positive rocket mass",
}

kernel = None
if not os.environ.get("MADSNMPC_PURE_PYTHON"):
    try:
        from . import _rocket_kernel as kernel
    except ImportError:
        kernel = None

HAVE_KERNEL = kernel is not None
DEFAULT = "compiled" if HAVE_KERNEL else "python"


def resolve(name: str | None) -> str:
    if name is None:
        return DEFAULT
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and not HAVE_KERNEL:
        raise RuntimeError("compiled rocket kernel is not available; rebuild the package with Cython")
    return name
