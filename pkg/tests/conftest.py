"""Shared fixtures: warm the jitted kernels once so timed tests measure algorithms."""

import pytest

from summax import GridSpec, cdf_recursive, exponential, pdf_iid_recursive, pdf_recursive


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # The first call into each numba kernel pays compilation (cached on disk
    # afterwards, but a cold cache would otherwise land inside a timed
    # acceptance test). Tiny grids keep this cheap.
    spec = GridSpec(y_max=4.0, z_max=2.0, n_y=24, n_z=20)
    m = exponential(1.0)
    cdf_recursive([m] * 4, spec)
    pdf_iid_recursive(m, 4, spec)
    pdf_recursive([m, exponential(2.0), m, m], spec)
    yield
