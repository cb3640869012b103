import numpy as np
import pytest

from tmc.tracks import GROUND_FRAME, Track


def make_track(points, track_id="t0", frame=GROUND_FRAME, **kw):
    return Track(track_id=track_id, camera_id="cam", frame=frame,
                 points=np.asarray(points, dtype=float), **kw)


@pytest.fixture
def straight_track():
    return make_track([[0.0, 0.0], [10.0, 0.0]])
