"""Trial-loop kernels: compiled when the extension built, else pure Python.

`kernels` resolves lazily to whichever implementation is active; both
expose run_kennedy / run_sh / run_dolinar with identical draw orders,
verified bit-identical in the test suite.  Set
COHRX_FORCE_PYTHON_KERNELS=1 to pin the fallback (used by the benchmark
and the equivalence tests).
"""

import os


def _select():
    from . import pykernels

    if not os.environ.get("COHRX_FORCE_PYTHON_KERNELS"):
        try:
            from . import ckernels

            return ckernels, True
        except ImportError:
            pass
    return pykernels, False


def __getattr__(name):
    if name in ("kernels", "COMPILED"):
        selected, compiled = _select()
        globals()["kernels"] = selected
        globals()["COMPILED"] = compiled
        return globals()[name]
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
