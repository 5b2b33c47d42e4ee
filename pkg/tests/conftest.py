import numpy as np
import pytest

from shinefs._backend import available_backends, get_backend
from shinefs.data import SynthSpec, synth_generate
from shinefs.model import HyperParams

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=available_backends())
def backend(request):
    return get_backend(request.param)


@pytest.fixture(scope="session")
def small_dataset():
    return synth_generate(SynthSpec(n=60, c_true=3, l=2, d_info=4, d_noise=8, separation=6.0, seed=3))


@pytest.fixture(scope="session")
def small_params():
    return HyperParams(c=3, k=4, rel_tol=1e-5, max_outer_iters=30)
