"""Decoders for the scenario records of the Waymo Open Motion Dataset.

Only the fields the converter needs are decoded; map features and dynamic
(traffic light) states are counted and dropped.  Field numbers follow the
public ``scenario.proto``.
"""

from dataclasses import dataclass, field

from .protowire import WireError, as_double, as_float, as_signed, doubles_from, iter_fields

OBJECT_TYPE_UNSET = 0
OBJECT_TYPE_VEHICLE = 1
OBJECT_TYPE_PEDESTRIAN = 2
OBJECT_TYPE_CYCLIST = 3
OBJECT_TYPE_OTHER = 4


@dataclass
class ObjectStateData:
    center_x: float = 0.0
    center_y: float = 0.0
    heading: float = 0.0
    velocity_x: float = 0.0
    velocity_y: float = 0.0
    valid: bool = False


@dataclass
class TrackData:
    track_id: int = 0
    object_type: int = OBJECT_TYPE_UNSET
    states: list = field(default_factory=list)


@dataclass
class ScenarioData:
    scenario_id: str = ""
    timestamps: list = field(default_factory=list)
    current_time_index: int = 0
    tracks: list = field(default_factory=list)
    ttp_track_indices: list = field(default_factory=list)
    n_map_features: int = 0
    n_dynamic_states: int = 0


def decode_object_state(data: bytes) -> ObjectStateData:
    state = ObjectStateData()
    for field_no, wire_type, value in iter_fields(data):
        if field_no == 2:
            state.center_x = as_double(value)
        elif field_no == 3:
            state.center_y = as_double(value)
        elif field_no == 8:
            state.heading = as_float(value)
        elif field_no == 9:
            state.velocity_x = as_float(value)
        elif field_no == 10:
            state.velocity_y = as_float(value)
        elif field_no == 11:
            state.valid = bool(value)
    return state


def decode_track(data: bytes) -> TrackData:
    track = TrackData()
    for field_no, wire_type, value in iter_fields(data):
        if field_no == 1:
            track.track_id = as_signed(value)
        elif field_no == 2:
            track.object_type = as_signed(value)
        elif field_no == 3:
            track.states.append(decode_object_state(value))
    return track


def _decode_required_prediction(data: bytes) -> int:
    for field_no, wire_type, value in iter_fields(data):
        if field_no == 1:
            return as_signed(value)
    return -1


def decode_scenario(data: bytes) -> ScenarioData:
    scenario = ScenarioData()
    for field_no, wire_type, value in iter_fields(data):
        if field_no == 5:
            if not isinstance(value, bytes):
                raise WireError("scenario_id: expected a string field")
            scenario.scenario_id = value.decode("utf-8")
        elif field_no == 1:
            scenario.timestamps.extend(doubles_from(wire_type, value))
        elif field_no == 10:
            scenario.current_time_index = as_signed(value)
        elif field_no == 2:
            scenario.tracks.append(decode_track(value))
        elif field_no == 11:
            idx = _decode_required_prediction(value)
            if idx >= 0:
                scenario.ttp_track_indices.append(idx)
        elif field_no == 8:
            scenario.n_map_features += 1
        elif field_no == 7:
            scenario.n_dynamic_states += 1
    return scenario
