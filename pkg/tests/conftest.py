import numpy as np
import pytest

from tdboost import kernels
from tdboost import _pykernels

try:
    from tdboost import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


@pytest.fixture(params=BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
def backend(request, monkeypatch):
    """Run a test once per kernel implementation."""
    mod = request.param
    for name in ("log_wright_series", "grow_tree", "apply_tree"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return mod


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
