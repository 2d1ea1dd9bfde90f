import pytest

import meanlcb


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile/load the JIT kernels once so individual tests never pay for it."""
    meanlcb.warmup()
