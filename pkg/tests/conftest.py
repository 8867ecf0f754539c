import numpy as np
import pytest
from hypothesis import settings, strategies as st

from feedinfluence.model import ActivityLog, SocialGraph

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

KINDS = ("a", "b")


@st.composite
def micro_world(draw, max_users=8, max_items=6, max_events=60, max_time=15, kinds=KINDS):
    """Small random (log, graph) with integer times so timestamp ties are common."""
    n_users = draw(st.integers(2, max_users))
    n_items = draw(st.integers(1, max_items))
    n = draw(st.integers(0, max_events))
    ev = st.tuples(st.integers(0, n_users - 1), st.integers(0, n_items - 1), st.integers(0, max_time),
                   st.sampled_from(kinds))
    rows = draw(st.lists(ev, min_size=n, max_size=n))
    pairs = [(a, b) for a in range(n_users) for b in range(a + 1, n_users)]
    edges = draw(st.lists(st.sampled_from(pairs), max_size=len(pairs), unique=True)) if pairs else []
    users = np.arange(n_users)
    if rows:
        u, i, t, k = zip(*rows)
    else:
        u = i = t = k = ()
    log = ActivityLog.from_columns(np.array(u, dtype=np.int64), np.array(i, dtype=np.int64),
                                   np.array(t, dtype=np.float64), list(k), kinds=kinds, users=users,
                                   items=np.arange(n_items))
    graph = SocialGraph.from_codes([e[0] for e in edges], [e[1] for e in edges], users)
    return log, graph


@pytest.fixture(scope="session")
def small_world():
    from feedinfluence.synthgen import generate_network
    return generate_network(n_users=300, n_items=1500, n_clusters=4, mean_actions=40, seed=7)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
