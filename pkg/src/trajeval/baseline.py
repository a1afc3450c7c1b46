"""Constant-velocity baseline predictor.

Extrapolates the state at the prediction origin with unchanged velocity,
ignoring history, other road users and the map.  Emits a single-mode
prediction set in the same shape external models use, so it flows through
the evaluation pipeline unchanged.
"""

import numpy as np

from .core import CURRENT_INDEX, HorizonGrid, PredictionSet, Track, TrajevalError


class NotPredictableError(TrajevalError):
    """The track is not observed at the prediction origin."""


def predict_cv(track: Track, grid: HorizonGrid) -> PredictionSet:
    if not track.valid[CURRENT_INDEX]:
        raise NotPredictableError(f"track {track.track_id!r} is invalid at the prediction origin")
    origin = track.xy[CURRENT_INDEX]
    velocity = track.vxy[CURRENT_INDEX]
    horizons = np.asarray(grid.horizons)
    points = origin[None, :] + horizons[:, None] * velocity[None, :]
    return PredictionSet(track.track_id, points[None, :, :], np.array([1.0]))
