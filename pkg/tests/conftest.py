"""Shared fixtures, the acceptance report and a suite-wide AO trace recorder."""
from __future__ import annotations

import contextlib

import numpy as np
import pytest

import rsma.optimizer as opt

ACCEPTANCE: dict[int, tuple[bool, str]] = {}
AO_RUNS: list = []

_original_ao = opt.ao_maximize
_scope = {"preset": None}


def _recording_ao(*args, **kw):
    res = _original_ao(*args, **kw)
    res.call = {"max_iter": kw.get("max_iter", 200), "tol": kw.get("tol", 1e-4), "preset": _scope["preset"]}
    AO_RUNS.append(res)
    return res


@contextlib.contextmanager
def preset_scope(name: str):
    """Tag AO runs made inside the block as runs on preset ``name``."""
    old = _scope["preset"]
    _scope["preset"] = name
    try:
        yield
    finally:
        _scope["preset"] = old


def pytest_configure(config):
    opt.ao_maximize = _recording_ao


def pytest_collection_modifyitems(session, config, items):
    # acceptance tests run last so the suite-wide AO checks see every run
    items.sort(key=lambda it: it.nodeid.split("::")[0].endswith("test_acceptance.py"))


def trace_violations(runs, slack=1e-8):
    """(non-monotone runs, runs ending without convergence)"""
    bad_mono, unconverged = [], []
    for r in runs:
        w = [t["wsr"] for t in r.trace if t["wsr"] is not None]
        if r.initial_wsr is not None:
            w = [r.initial_wsr] + w
        if any(b < a - slack for a, b in zip(w, w[1:])):
            bad_mono.append(r)
        if r.status != "converged" and r.status != "infeasible":
            unconverged.append(r)
    return bad_mono, unconverged


def first_termination(res, eps=1e-4):
    """Iteration at which |WSR_n - WSR_{n-1}| <= eps first holds (None if never)."""
    w = [res.initial_wsr] + [t["wsr"] for t in res.trace]
    for n, (a, b) in enumerate(zip(w, w[1:]), 1):
        if a is not None and b is not None and abs(b - a) <= eps:
            return n
    return None


def record(criterion: int, ok: bool, detail: str):
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"CRITERION {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for c in sorted(ACCEPTANCE):
            ok, detail = ACCEPTANCE[c]
            terminalreporter.write_line(f"CRITERION {c}: {'PASS' if ok else 'FAIL'} - {detail}")
    if AO_RUNS:
        mono, unconv = trace_violations(AO_RUNS)
        terminalreporter.section("AO runs in this session")
        terminalreporter.write_line(f"{len(AO_RUNS)} AO runs, {len(mono)} with a decreasing WSR trace "
                                    f"(slack 1e-8), {len(unconv)} not converged "
                                    f"(includes runs with deliberately small max_iter)")
        for r in mono:
            w = [r.initial_wsr] + [t["wsr"] for t in r.trace]
            drops = [(i, b - a) for i, (a, b) in enumerate(zip(w, w[1:])) if a is not None and b is not None
                     and b < a - 1e-8]
            terminalreporter.write_line(f"  decreasing: {r.layout.strategy} K={r.layout.K} status={r.status} "
                                        f"drops (iteration, change)={drops}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
