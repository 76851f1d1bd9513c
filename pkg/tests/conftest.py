import os

# The suite works on tiny matrices; multi-threaded BLAS only adds dispatch
# overhead (and an order-of-magnitude slowdown on many-core machines).
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from mlcc import builtin_field, build_rule


@pytest.fixture(scope="session")
def gauss1():
    return builtin_field("gaussian_scalar", {"n": 1})


@pytest.fixture(scope="session")
def gauss2():
    return builtin_field("gaussian_scalar", {"n": 2})


@pytest.fixture(scope="session")
def gh64():
    return build_rule("gauss_hermite", order=64, m=1)


@pytest.fixture(scope="session")
def gh32x1():
    return build_rule("gauss_hermite", order=32, m=1)


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))
