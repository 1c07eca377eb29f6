"""Black-box access to pose estimators.

Three adapter kinds share one ``detect`` contract:

- ``synthetic``: a marker-based detector for generated fixture images, giving
  desk-scale end-to-end verification without any ML model;
- ``replay``: serves stored responses keyed by image id;
- ``external_process``: drives a child process speaking a newline-delimited
  JSON protocol over stdin/stdout — one request per line, one response per
  line, in order.

Wire schema (all coordinates relative, top-left origin):

    request:  {"request_id": str, "image_path": str,
               "image_width": int, "image_height": int}
    response: {"request_id": str, "subjects": [
                  {"groups": {kind: [
                      {"landmark_id": int, "x": float, "y": float,
                       "z": float|null, "present": bool}]}}]}

A response may instead carry {"request_id": ..., "error": str}; any protocol
violation raises AdapterFailure with the raw payload attached so the record
can be marked unevaluable rather than silently dropped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import select
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from posemt import imaging
from posemt.core import GROUP_KINDS, Keypoint, PoseOutput, SubjectPose
from posemt.errors import AdapterFailure, ConfigError

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0

# Synthetic fixtures use grey markers: identity survives any monotone
# luma-preserving recolouring (greyscale, gamma, brightness scaling), and the
# colour-match window survives interpolation at marker interiors.
MARKER_MATCH_TOLERANCE = 2
FOREGROUND_THRESHOLD = 16
MARKER_CORE_MIN_PIXELS = 4


def make_grey_palette(count: int = 33) -> dict[int, tuple[int, int, int]]:
    """One unique grey level per landmark, spaced 6 levels apart from 62 up."""
    if count > 33:
        raise ConfigError("grey palette supports at most 33 landmarks")
    return {i: (62 + 6 * i,) * 3 for i in range(count)}


@dataclass(frozen=True)
class AdapterHandle:
    """Configuration of one SUT adapter."""

    kind: str
    command: tuple[str, ...] = ()
    replay_path: str = ""
    palette: dict[int, tuple[int, int, int]] | None = None
    declared_deterministic: bool = True
    parallel_safe: bool = False
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.kind not in ("external_process", "replay", "synthetic"):
            raise ConfigError(f"unknown adapter kind {self.kind!r}")
        object.__setattr__(self, "command", tuple(self.command))

    @property
    def fingerprint(self) -> str:
        if self.kind == "external_process":
            detail = " ".join(self.command)
        elif self.kind == "replay":
            detail = self.replay_path
        else:
            detail = json.dumps(sorted((self.palette or make_grey_palette()).items()))
        return hashlib.sha256(f"{self.kind}:{detail}".encode()).hexdigest()[:16]


def parse_response(payload: str, request_id: str) -> PoseOutput:
    """Validate a raw response line and build a PoseOutput."""
    try:
        data = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise AdapterFailure(f"malformed response JSON: {exc}", payload)
    if not isinstance(data, dict):
        raise AdapterFailure("response is not an object", payload)
    if data.get("request_id") != request_id:
        raise AdapterFailure(
            f"request_id mismatch: sent {request_id!r}, got {data.get('request_id')!r}",
            payload,
        )
    if "error" in data:
        raise AdapterFailure(f"adapter error: {data['error']}", payload)
    subjects = []
    try:
        for subj in data.get("subjects", []):
            groups = {}
            for kind, kps in subj["groups"].items():
                if kind not in GROUP_KINDS:
                    raise AdapterFailure(f"unknown group kind {kind!r}", payload)
                groups[kind] = tuple(
                    Keypoint(
                        landmark_id=int(kp["landmark_id"]),
                        x=float(kp["x"]),
                        y=float(kp["y"]),
                        z=None if kp.get("z") is None else float(kp["z"]),
                        present=bool(kp.get("present", True)),
                    )
                    for kp in kps
                )
            subjects.append(SubjectPose(groups=groups))
    except (KeyError, TypeError, ValueError) as exc:
        raise AdapterFailure(f"malformed subject record: {exc}", payload)
    return PoseOutput(
        subjects=tuple(subjects),
        image_width=int(data.get("image_width", 0)),
        image_height=int(data.get("image_height", 0)),
    )


def pose_to_payload(pose: PoseOutput, request_id: str) -> dict:
    return {
        "request_id": request_id,
        "subjects": [
            {
                "groups": {
                    kind: [
                        {"landmark_id": kp.landmark_id, "x": kp.x, "y": kp.y,
                         "z": kp.z, "present": kp.present}
                        for kp in kps
                    ]
                    for kind, kps in subj.groups.items()
                }
            }
            for subj in pose.subjects
        ],
    }


def _modal_colour(img: np.ndarray) -> np.ndarray:
    packed = (img[..., 0].astype(np.int64) << 16) | \
             (img[..., 1].astype(np.int64) << 8) | img[..., 2].astype(np.int64)
    values, counts = np.unique(packed, return_counts=True)
    top = int(values[np.argmax(counts)])
    return np.array([(top >> 16) & 255, (top >> 8) & 255, top & 255], dtype=np.int64)


def _components(foreground: np.ndarray) -> list[np.ndarray]:
    """Connected components (4-neighbour) of a boolean image.

    Returns one boolean mask per component.
    """
    labels, count = ndimage.label(foreground)
    return [labels == index for index in range(1, count + 1)]


def _find_blobs(img: np.ndarray) -> list[np.ndarray]:
    """Connected components of pixels far from the modal colour."""
    background = _modal_colour(img)
    diff = np.abs(img.astype(np.int16) - background.astype(np.int16))
    return _components(diff.max(axis=2) > FOREGROUND_THRESHOLD)


def _exact_window_match(img: np.ndarray,
                        palette: dict[int, tuple[int, int, int]]) -> dict[int, tuple[float, float]]:
    """Centroid of the marker core matching each palette colour.

    Blur transforms smear marker borders into intermediate greys that can
    collide with nearby palette entries, so matching pixels are reduced to
    their largest connected component — the surviving core of the true
    marker — and thin contamination bands are discarded by a size floor.
    """
    found: dict[int, tuple[float, float]] = {}
    pixels = img.astype(np.int16)
    for landmark_id, colour in palette.items():
        r, g, b = colour
        close = ((np.abs(pixels[..., 0] - r) <= MARKER_MATCH_TOLERANCE)
                 & (np.abs(pixels[..., 1] - g) <= MARKER_MATCH_TOLERANCE)
                 & (np.abs(pixels[..., 2] - b) <= MARKER_MATCH_TOLERANCE))
        ys, xs = np.nonzero(close)
        if ys.size == 0:
            continue
        y0, x0 = ys.min(), xs.min()
        sub = close[y0:ys.max() + 1, x0:xs.max() + 1]
        labels, count = ndimage.label(sub)
        sizes = np.bincount(labels.ravel())[1:]
        core = int(np.argmax(sizes)) + 1
        if sizes[core - 1] < MARKER_CORE_MIN_PIXELS:
            continue
        cy, cx = ndimage.center_of_mass(sub, labels, core)
        found[landmark_id] = (float(cx) + x0 + 0.5, float(cy) + y0 + 0.5)
    return found


def synthetic_detect(img: np.ndarray,
                     palette: dict[int, tuple[int, int, int]] | None = None) -> PoseOutput:
    """Detect grey marker landmarks in a fixture image.

    Exact colour matching handles geometric transforms, whose bilinear
    resampling keeps a pure marker core.  When recolouring has shifted every
    marker off its palette value, markers are still bright blobs on a flat
    background and any global monotone luma map preserves their brightness
    order, so blobs are matched to palette entries by luma rank instead.
    """
    palette = palette or make_grey_palette()
    h, w = img.shape[:2]

    positions = _exact_window_match(img, palette)
    if len(positions) != len(palette):
        blobs = _find_blobs(img)
        if len(blobs) == len(palette):
            background = _modal_colour(img).astype(np.float64)
            luma_w = np.array([0.299, 0.587, 0.114])
            luma = (np.abs(img.astype(np.float64) - background) * luma_w).sum(axis=2)
            ranked = []
            for mask in blobs:
                weights = luma * mask
                total = weights.sum()
                ys, xs = np.nonzero(mask)
                cx = (weights[ys, xs] * (xs + 0.5)).sum() / total
                cy = (weights[ys, xs] * (ys + 0.5)).sum() / total
                ranked.append((weights.max(), cx, cy))
            ranked.sort()
            order = sorted(palette, key=lambda lid: palette[lid])
            positions = {
                lid: (cx, cy)
                for lid, (_, cx, cy) in zip(order, ranked)
            }

    if not positions:
        return PoseOutput(subjects=(), image_width=w, image_height=h)

    keypoints = tuple(
        Keypoint(landmark_id=lid, x=px / w, y=py / h)
        for lid, (px, py) in sorted(positions.items())
    )
    subject = SubjectPose(groups={"body_pose": keypoints})
    return PoseOutput(subjects=(subject,), image_width=w, image_height=h)


class SyntheticAdapter:
    def __init__(self, handle: AdapterHandle):
        self.handle = handle
        self.palette = handle.palette or make_grey_palette()

    def detect(self, image, image_id: str = "") -> PoseOutput:
        img = image if isinstance(image, np.ndarray) else imaging.load_image(image)
        pose = synthetic_detect(img, self.palette)
        return PoseOutput(pose.subjects, image_id, pose.image_width, pose.image_height)

    def close(self):
        pass


class ReplayAdapter:
    """Serves stored responses from a JSON file mapping image_id to payload."""

    def __init__(self, handle: AdapterHandle):
        self.handle = handle
        try:
            with open(handle.replay_path) as fh:
                self._responses = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read replay file {handle.replay_path}: {exc}")

    def detect(self, image, image_id: str = "") -> PoseOutput:
        key = image_id or (Path(image).stem if not isinstance(image, np.ndarray) else "")
        if key not in self._responses:
            raise AdapterFailure(f"no stored response for image {key!r}")
        payload = dict(self._responses[key])
        payload["request_id"] = key
        pose = parse_response(json.dumps(payload), key)
        return PoseOutput(pose.subjects, key, pose.image_width, pose.image_height)

    def close(self):
        pass


class ExternalProcessAdapter:
    """One child process, one in-flight request at a time."""

    def __init__(self, handle: AdapterHandle):
        self.handle = handle
        self._counter = 0
        try:
            self._proc = subprocess.Popen(
                handle.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise AdapterFailure(f"cannot start adapter {handle.command}: {exc}")

    def _read_line(self) -> str:
        stream = self._proc.stdout
        ready, _, _ = select.select([stream], [], [], self.handle.timeout)
        if not ready:
            self._proc.kill()
            raise AdapterFailure(f"adapter timed out after {self.handle.timeout}s")
        line = stream.readline()
        if not line:
            raise AdapterFailure(
                f"adapter exited (code {self._proc.poll()}) before responding"
            )
        return line

    def detect(self, image, image_id: str = "") -> PoseOutput:
        tmp_path = None
        if isinstance(image, np.ndarray):
            fd, tmp_path = tempfile.mkstemp(suffix=".png")
            os.close(fd)
            imaging.save_image(image, tmp_path)
            path, (h, w) = tmp_path, image.shape[:2]
        else:
            path = os.fspath(image)
            img = imaging.load_image(path)
            h, w = img.shape[:2]
        self._counter += 1
        request_id = f"{image_id or Path(path).stem}-{self._counter}"
        request = {
            "request_id": request_id,
            "image_path": str(Path(path).resolve()),
            "image_width": w,
            "image_height": h,
        }
        try:
            if self._proc.poll() is not None:
                raise AdapterFailure(f"adapter process died (code {self._proc.poll()})")
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
            line = self._read_line()
        except BrokenPipeError as exc:
            raise AdapterFailure(f"adapter pipe broke: {exc}")
        finally:
            if tmp_path:
                os.unlink(tmp_path)
        pose = parse_response(line, request_id)
        return PoseOutput(pose.subjects, image_id, w, h)

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()


class CachedAdapter:
    """Persists responses keyed by (adapter fingerprint, image content hash)."""

    def __init__(self, inner, cache_dir):
        self.inner = inner
        self.handle = inner.handle
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _key(self, image_bytes: bytes) -> str:
        digest = hashlib.sha256()
        digest.update(self.handle.fingerprint.encode())
        digest.update(image_bytes)
        return digest.hexdigest()

    def detect(self, image, image_id: str = "") -> PoseOutput:
        if isinstance(image, np.ndarray):
            image_bytes = image.tobytes() + repr(image.shape).encode()
        else:
            image_bytes = Path(image).read_bytes()
        key = self._key(image_bytes)
        path = self.cache_dir / f"{key}.json"
        if path.exists():
            try:
                pose = parse_response(path.read_text(), key)
                return PoseOutput(pose.subjects, image_id,
                                  pose.image_width, pose.image_height)
            except AdapterFailure:
                logger.warning("corrupt cache entry %s; recomputing", path)
        pose = self.inner.detect(image, image_id)
        payload = pose_to_payload(pose, key)
        payload["image_width"] = pose.image_width
        payload["image_height"] = pose.image_height
        path.write_text(json.dumps(payload))
        sidecar = self.cache_dir / f"{key}.meta.json"
        sidecar.write_text(json.dumps({
            "adapter_fingerprint": self.handle.fingerprint,
            "image_id": image_id,
        }))
        return pose

    def close(self):
        self.inner.close()


def build_adapter(handle: AdapterHandle, cache_dir=None):
    if handle.kind == "synthetic":
        adapter = SyntheticAdapter(handle)
    elif handle.kind == "replay":
        adapter = ReplayAdapter(handle)
    else:
        adapter = ExternalProcessAdapter(handle)
    if cache_dir is not None:
        adapter = CachedAdapter(adapter, cache_dir)
    return adapter


def detect(adapter, image, image_id: str = "") -> PoseOutput:
    """Query an adapter instance; see the module docstring for the contract."""
    return adapter.detect(image, image_id)
