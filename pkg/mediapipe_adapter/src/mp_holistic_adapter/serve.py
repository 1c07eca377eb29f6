"""Request loop: read requests from stdin, write responses to stdout.

Single-threaded and strictly in order — the adapter is not parallel-safe;
the harness spawns multiple processes if it wants concurrency. Any per-request
failure (unreadable image, detector exception) becomes an error response for
that request_id and the loop continues.
"""

from __future__ import annotations

import argparse
import sys
from typing import Callable, TextIO

from mp_holistic_adapter.protocol import (
    ProtocolError,
    error_line,
    parse_request,
    response_line,
)

Detector = Callable[[str], list[dict]]


def serve(detector: Detector, stdin: TextIO, stdout: TextIO) -> None:
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = parse_request(line)
        except ProtocolError as exc:
            stdout.write(error_line("", str(exc)) + "\n")
            stdout.flush()
            continue
        try:
            subjects = detector(request.image_path)
            out = response_line(request.request_id, subjects)
        except Exception as exc:
            out = error_line(request.request_id, f"{type(exc).__name__}: {exc}")
        stdout.write(out + "\n")
        stdout.flush()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="MediaPipe Holistic pose estimator speaking the "
                    "newline-delimited JSON detection protocol on stdin/stdout.")
    parser.add_argument("--model-complexity", type=int, default=1,
                        choices=(0, 1, 2))
    parser.add_argument("--min-detection-confidence", type=float, default=0.5)
    args = parser.parse_args(argv)

    from mp_holistic_adapter.backend import HolisticBackend, HolisticConfig

    try:
        backend = HolisticBackend(HolisticConfig(
            model_complexity=args.model_complexity,
            min_detection_confidence=args.min_detection_confidence,
        ))
    except ImportError as exc:
        print(f"mediapipe is not installed: {exc}", file=sys.stderr)
        return 1

    try:
        serve(backend.detect, sys.stdin, sys.stdout)
    finally:
        backend.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
