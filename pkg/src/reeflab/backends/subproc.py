"""Client for external mask adapters speaking newline-delimited JSON.

One request per line on the adapter's stdin, one response per line on its
stdout, matched by ``id`` (responses may arrive out of order; the client
multiplexes).  Wire schema in docs/formats.md.
"""

from __future__ import annotations

import itertools
import json
import subprocess
import threading
from pathlib import Path
from typing import Sequence

from PIL import Image, UnidentifiedImageError

from ..errors import BackendUnavailableError, ValidationError
from ..masks import BinaryMask
from .base import (
    BackendDescriptor,
    MaskProposal,
    PointPrompt,
    SegmentationBackend,
    filter_proposals,
    split_command,
    validate_prompts,
)


class SubprocessBackend(SegmentationBackend):
    """Talks to a long-running adapter process over stdin/stdout pipes.

    The engine re-applies area/confidence filtering and ordering to whatever
    the adapter returns, so protocol guarantees do not depend on adapter
    behavior.
    """

    def __init__(self, command: str | Sequence[str]):
        argv = split_command(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailableError(f"cannot start backend {argv!r}: {exc}")
        self._lock = threading.Lock()
        self._ids = itertools.count(1)
        self._pending: dict[int, dict] = {}
        self._prepared: set[int] = set()
        self._paths: dict[int, str] = {}
        self._sizes: dict[int, tuple[int, int]] = {}

    @classmethod
    def from_descriptor(cls, descriptor: BackendDescriptor) -> "SubprocessBackend":
        assert descriptor.kind == "subprocess"
        return cls(descriptor.command)

    # -- transport ---------------------------------------------------------

    def _roundtrip(self, op: str, image_id: int, params: dict) -> dict:
        request_id = next(self._ids)
        payload = {
            "id": request_id,
            "op": op,
            "image_id": image_id,
            "image_path": self._paths.get(image_id),
            "params": params,
        }
        with self._lock:
            if self._proc.poll() is not None:
                raise BackendUnavailableError("backend process has exited")
            try:
                self._proc.stdin.write(json.dumps(payload) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise BackendUnavailableError(f"backend pipe closed: {exc}")
            while request_id not in self._pending:
                line = self._proc.stdout.readline()
                if not line:
                    raise BackendUnavailableError("backend closed its output stream")
                try:
                    message = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise BackendUnavailableError(f"backend sent invalid JSON: {exc}")
                self._pending[int(message.get("id", -1))] = message
            response = self._pending.pop(request_id)
        if not response.get("ok"):
            raise ValidationError(f"backend error: {response.get('error', 'unspecified')}")
        return response

    def _proposals(self, response: dict) -> list[MaskProposal]:
        proposals = []
        for item in response.get("masks", []):
            mask = BinaryMask.from_json(item)
            proposals.append(MaskProposal(mask=mask, confidence=float(item.get("confidence", 1.0))))
        return proposals

    # -- protocol ----------------------------------------------------------

    def prepare(self, image_id: int, image_path: str | Path | None = None) -> None:
        if image_id in self._prepared:
            return
        if image_path is None:
            raise ValidationError("subprocess backend needs an image path to prepare")
        try:
            with Image.open(image_path) as img:
                width, height = img.size
        except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
            raise ValidationError(f"{image_path}: cannot decode image: {exc}")
        self._paths[image_id] = str(image_path)
        self._roundtrip("prepare", image_id, {})
        self._sizes[image_id] = (width, height)
        self._prepared.add(image_id)

    def is_prepared(self, image_id: int) -> bool:
        return image_id in self._prepared

    def _require_prepared(self, image_id: int) -> tuple[int, int]:
        if image_id not in self._prepared:
            raise ValidationError(f"image {image_id} is not prepared")
        return self._sizes[image_id]

    def auto_segment(
        self, image_id: int, min_area_fraction: float, confidence_threshold: float
    ) -> list[MaskProposal]:
        width, height = self._require_prepared(image_id)
        response = self._roundtrip(
            "auto",
            image_id,
            {
                "min_area_fraction": min_area_fraction,
                "confidence_threshold": confidence_threshold,
            },
        )
        return filter_proposals(
            self._proposals(response), width, height, min_area_fraction, confidence_threshold
        )

    def prompt(self, image_id: int, prompts: Sequence[PointPrompt]) -> MaskProposal:
        width, height = self._require_prepared(image_id)
        # Positive-polarity presence is enforced at the public API boundary;
        # refinement loops may legitimately send a lone negative point.
        validate_prompts(prompts, width, height, require_positive=False)
        response = self._roundtrip(
            "prompt", image_id, {"points": [p.to_dict() for p in prompts]}
        )
        proposals = self._proposals(response)
        if not proposals:
            return MaskProposal(mask=BinaryMask.empty(width, height), confidence=0.0)
        return proposals[0]

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdout is not None:
            self._proc.stdout.close()
