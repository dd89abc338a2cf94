import pytest

from polymer_lab import walk


@pytest.fixture(scope="session")
def kernel1() -> walk.TransitionKernel:
    return walk.build_kernel(1, 128)


@pytest.fixture(scope="session")
def kernel2() -> walk.TransitionKernel:
    return walk.build_kernel(2, 64)
