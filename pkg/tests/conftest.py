import numpy as np
import pytest


def random_sparse_precision(rng, p, density=0.15, margin=0.5):
    """Symmetric sparse matrix made positive definite by diagonal dominance."""
    mask = np.triu(rng.random((p, p)) < density, k=1)
    vals = rng.uniform(0.2, 1.0, size=(p, p)) * rng.choice([-1.0, 1.0], size=(p, p))
    A = np.where(mask, vals, 0.0)
    A = A + A.T
    np.fill_diagonal(A, np.abs(A).sum(axis=1) + margin)
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


from hypothesis import settings  # noqa: E402

settings.register_profile("repo", derandomize=True, deadline=None, print_blob=True)
settings.load_profile("repo")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
