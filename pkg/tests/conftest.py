import pytest

from opgram import kernels

BACKEND_NAMES = sorted(kernels.BACKENDS)


@pytest.fixture(params=BACKEND_NAMES)
def backend(request):
    return kernels.get_backend(request.param)
