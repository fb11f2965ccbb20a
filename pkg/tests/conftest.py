import numpy as np
import pytest

from taucoh.tda import StreamingTda, tda_properties


def batch_properties(trajectories):
    """Recompute everything from scratch out of the (K, N) trajectories.

    Independent of the recursive path: pairwise squared distances are formed
    directly and summed. Used as the reference wherever the streaming state
    is under test.
    """
    traj = np.asarray(trajectories, dtype=np.float64)
    diff = traj[:, :, None] - traj[:, None, :]
    d2 = (diff * diff).sum(axis=0)
    q = d2.sum(axis=1)
    return d2, tda_properties(q, k=traj.shape[0])


def stream_tda(trajectories, backend=None):
    """Push rows one at a time and return the live state."""
    traj = np.asarray(trajectories, dtype=np.float64)
    tda = StreamingTda(traj.shape[1], backend=backend)
    for row in traj:
        tda.push(row)
    return tda


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
