"""Wire protocol: newline-delimited JSON requests and responses.

One request per stdin line, one response per stdout line, strictly in order:

    request:  {"request_id": str, "image_path": str,
               "image_width": int, "image_height": int}
    response: {"request_id": str, "subjects": [
                  {"groups": {kind: [
                      {"landmark_id": int, "x": float, "y": float,
                       "z": float|null, "present": bool}]}}]}

A failed request yields {"request_id": ..., "error": str} instead; the loop
never dies on a bad request. All coordinates are relative to the image with a
top-left origin, passed through from the estimator untransformed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

GROUP_KINDS = ("body_pose", "face", "left_hand", "right_hand")


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class Request:
    request_id: str
    image_path: str
    image_width: int
    image_height: int


def parse_request(line: str) -> Request:
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed request JSON: {exc}")
    if not isinstance(data, dict):
        raise ProtocolError("request is not an object")
    try:
        return Request(
            request_id=str(data["request_id"]),
            image_path=str(data["image_path"]),
            image_width=int(data["image_width"]),
            image_height=int(data["image_height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"invalid request fields: {exc}")


def keypoint(landmark_id: int, x: float, y: float,
             z: float | None = None, present: bool = True) -> dict:
    return {"landmark_id": int(landmark_id), "x": float(x), "y": float(y),
            "z": None if z is None else float(z), "present": bool(present)}


def response_line(request_id: str, subjects: list[dict]) -> str:
    for subject in subjects:
        for kind in subject["groups"]:
            if kind not in GROUP_KINDS:
                raise ProtocolError(f"unknown group kind {kind!r}")
    return json.dumps({"request_id": request_id, "subjects": subjects},
                      sort_keys=True)


def error_line(request_id: str, message: str) -> str:
    return json.dumps({"request_id": request_id, "error": message},
                      sort_keys=True)
