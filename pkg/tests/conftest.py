import logging
import time

import pytest

from unidnn.harness.config import dump_config, make_config
from unidnn.harness.pipeline import bundle_dir, load_bundles, train_all

ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Record ``(passed, detail)`` per criterion; printed in the terminal summary."""
    return request.config.stash[ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        ok, detail = results[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


def fast_scenario(work_dir, n_pilots=8):
    return make_config("fast", n_pilots=n_pilots, work_dir=str(work_dir))


@pytest.fixture(scope="session")
def fast_run(request):
    """Fast-profile bundles at N_p=8, trained once and cached between sessions.

    Returns ``(scenario, bundles, train_seconds)``; ``train_seconds`` is 0 on
    a cache hit.  Delete ``.pytest_cache/d/unidnn-fast`` to force retraining.
    """
    scn = fast_scenario(request.config.cache.mkdir("unidnn-fast"))
    stamp = scn.work_path / f"np{scn.n_pilots}" / "config.yaml"
    if stamp.exists() and stamp.read_text() == dump_config(scn):
        return scn, load_bundles(scn), 0.0
    logging.getLogger("unidnn").setLevel(logging.INFO)
    t0 = time.perf_counter()
    bundles = train_all(scn)
    elapsed = time.perf_counter() - t0
    stamp.write_text(dump_config(scn))
    assert bundle_dir(scn).exists()
    return scn, bundles, elapsed
