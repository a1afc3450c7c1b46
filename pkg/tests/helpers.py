from pathlib import Path

import numpy as np

from trajeval import CURRENT_INDEX, N_FRAMES, RUClass, Track

GOLDEN_DIR = Path(__file__).parent / "golden"


def straight_track(
    track_id: str = "t000",
    ru_class: RUClass = RUClass.VEHICLE,
    origin=(0.0, 0.0),
    velocity=(0.0, 0.0),
    valid_frames=None,
    is_ttp: bool = False,
) -> Track:
    """Constant-velocity track through ``origin`` at the prediction origin."""
    t_rel = (np.arange(N_FRAMES) - CURRENT_INDEX) * 0.1
    velocity = np.asarray(velocity, dtype=float)
    xy = np.asarray(origin, dtype=float)[None, :] + t_rel[:, None] * velocity[None, :]
    vxy = np.tile(velocity, (N_FRAMES, 1))
    heading = np.zeros(N_FRAMES)
    valid = np.zeros(N_FRAMES, dtype=bool)
    if valid_frames is None:
        valid[:] = True
    else:
        valid[list(valid_frames)] = True
    return Track(track_id, ru_class, xy, vxy, heading, valid, is_ttp)
