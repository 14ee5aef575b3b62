"""Acceptance criteria, one test per suite, one printed line per check.

The same check implementations back `vptrap full-verify`; run with
`pytest -s tests/test_acceptance.py` to watch the lines stream.
The heavy reference runs (2D and 3D nonlinear) are built lazily on the
shared context and reused by the trapped and modified suites.
"""

import pytest

from vptrap.verify import SUITES, VerifyContext


@pytest.fixture(scope="module")
def ctx():
    return VerifyContext()


def _run(ctx, name):
    results = SUITES[name](ctx)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    assert not failed, "failed checks:\n" + "\n".join(r.line() for r in failed)


def test_algebra_suite(ctx):
    _run(ctx, "algebra")


def test_kernel_suite(ctx):
    _run(ctx, "kernel")


def test_linear_decay_suite(ctx):
    _run(ctx, "linear-decay")


def test_integrator_suite(ctx):
    _run(ctx, "integrator")


def test_nonlinear_decay_suite(ctx):
    _run(ctx, "nonlinear")


def test_trapped_set_suite(ctx):
    _run(ctx, "trapped")


def test_modified_coefficients_suite(ctx):
    _run(ctx, "modified")
