import os
import subprocess
import sys

import numpy as np
import pytest

from feedinfluence import kernels
from feedinfluence.feed import LATEST, FeedModel, overlap_counts
from feedinfluence.model import time_quantile
from feedinfluence.synthgen import SynthProcess, generate, neighbor_table

pytestmark = pytest.mark.skipif(kernels.BACKEND != "compiled", reason="compiled extension not built")


@pytest.mark.parametrize("proc", ["ci", "pp", "ee", "mix:0.3"])
def test_generators_identical(small_world, proc):
    log, graph = small_world
    T = time_quantile(log, 0.8)
    nb = neighbor_table(log, T, 10)
    sp = SynthProcess.parse(proc)
    a = generate(log, graph, sp, T, seed=5, neighbors=nb, backend="python")
    b = generate(log, graph, sp, T, seed=5, neighbors=nb, backend="compiled")
    assert np.array_equal(a.output.item, b.output.item)
    assert (a.n_fallback, a.n_copy_choices) == (b.n_fallback, b.n_copy_choices)


@pytest.mark.parametrize("mode", ["full", LATEST])
def test_sweeps_identical_on_generated_network(small_world, mode):
    log, graph = small_world
    users = np.arange(log.n_users)
    sets = [[graph.neighbors(u) for u in users], [graph.neighbors((u + 1) % log.n_users) for u in users]]
    args = (log, users, sets, FeedModel(7, mode), None, None)
    T = time_quantile(log, 0.5)
    a = overlap_counts(*args, t_from=T, backend="python")
    b = overlap_counts(*args, t_from=T, backend="compiled")
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_environment_forces_python_backend():
    env = dict(os.environ, FEEDINFLUENCE_PURE="1")
    code = "from feedinfluence import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
