import json
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from cassl import kernels
from cassl.sensitivity import SensitivityReport

FIXTURES = Path(__file__).parent / "fixtures"

KERNEL_NAMES = ("sobol_block", "sobol_estimates", "bootstrap_estimates", "subset_energies", "tabular_counts",
                "logistic_loss_grad", "adam_epochs", "grasp_logits")


def _backend(suffix):
    return SimpleNamespace(**{n: getattr(kernels, f"{n}_{suffix}") for n in KERNEL_NAMES})


@pytest.fixture(params=["nb", "np"])
def backend(request):
    """Kernel set for one backend; every kernel test runs against both."""
    return _backend(request.param)


@pytest.fixture(scope="session")
def grasp_indices_path():
    return FIXTURES / "grasp_indices.json"


@pytest.fixture(scope="session")
def grasp_indices(grasp_indices_path):
    return SensitivityReport.from_dict(json.loads(grasp_indices_path.read_text()))


def random_report(rng, k, second_order=True):
    s1 = rng.uniform(-0.1, 0.6, k)
    st = s1 + rng.uniform(-0.05, 0.8, k)
    s2 = rng.uniform(-0.3, 0.3, (k, k))
    s2 = np.triu(s2, 1)
    s2 = s2 + s2.T
    return SensitivityReport(s1, st, s2 if second_order else None, 1.0, 8, tuple(f"d{i}" for i in range(k)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    order = sorted(results, key=lambda k: (int("".join(ch for ch in k.split()[0] if ch.isdigit())), k))
    for key in order:
        terminalreporter.write_line(results[key])
