import numpy as np
import pytest

from trajkd.benchmark import default_config, generate
from trajkd.data import ObjectDatabase, Trajectory


def make_traj(points, frames=None, object_id="t"):
    points = np.asarray(points, dtype=np.float64)
    if frames is None:
        frames = np.arange(len(points))
    return Trajectory(object_id=object_id, frames=np.asarray(frames),
                      positions=points)


def random_trajectory(rng, n_min=2, n_max=40, scale=10.0, object_id="t",
                      consecutive=True):
    n = int(rng.integers(n_min, n_max + 1))
    if consecutive:
        frames = np.arange(n)
    else:
        frames = np.sort(rng.choice(10 * n, size=n, replace=False))
    positions = rng.normal(0.0, scale, size=(n, 3))
    return Trajectory(object_id=object_id, frames=frames, positions=positions)


def make_db(trajectories, db_id="db", **kwargs):
    kwargs.setdefault("complete_tracks", False)
    return ObjectDatabase.from_trajectories(db_id, trajectories, **kwargs)


@pytest.fixture(scope="session")
def benchmark():
    """The default benchmark database and its ground truth (fixed seed)."""
    return generate(default_config())


@pytest.fixture(scope="session")
def example_record():
    from trajkd.example_pipeline import build_example_record

    return build_example_record()


@pytest.fixture(scope="session")
def benchmark_db(benchmark):
    return benchmark[0]


@pytest.fixture(scope="session")
def benchmark_truth(benchmark):
    return benchmark[1]
