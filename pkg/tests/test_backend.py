import os
import subprocess
import sys

import pytest

from cassl import kernels


def _probe(env_value):
    env = dict(os.environ)
    env.pop("CASSL_DISABLE_NUMBA", None)
    if env_value is not None:
        env["CASSL_DISABLE_NUMBA"] = env_value
    code = "import cassl, cassl.kernels as k; print(cassl.backend(), k.sobol_block.__name__)"
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                          check=True).stdout.split()


@pytest.mark.parametrize("value", ["1", "true"])
def test_env_flag_selects_numpy(value):
    assert _probe(value) == ["numpy", "sobol_block_np"]


def test_numba_is_default():
    assert _probe(None) == ["numba", "sobol_block_nb"]


def test_every_kernel_has_both_flavours():
    for name in ("sobol_block", "sobol_estimates", "bootstrap_estimates", "subset_energies", "tabular_counts",
                 "logistic_loss_grad", "adam_epochs", "grasp_logits"):
        assert callable(getattr(kernels, f"{name}_nb")) and callable(getattr(kernels, f"{name}_np"))
        assert getattr(kernels, name) in (getattr(kernels, f"{name}_nb"), getattr(kernels, f"{name}_np"))
