"""File-backed enrollment store: one template file per (subject, eye).

The gallery is a plain directory: template files plus an ``entries.json``
index mapping (subject, eye side) to the template path, creation time,
and the quality report measured at enrollment.  Mutations take an
advisory lock file; reads never lock.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import GalleryError, QualityGateError
from .evaluation import EYES
from .imaging import EyeImage, MaskImage
from .matching import DecisionThreshold, MatchResult, decide, match_shifted
from .pipeline import PipelineConfig, ProcessedEye, process_eye
from .quality import QualityReport
from .template import IrisTemplate, load_template, save_template

INDEX_NAME = "entries.json"
LOCK_NAME = ".gallery.lock"


@dataclass(frozen=True)
class GalleryEntry:
    subject_id: str
    eye: str
    template_path: str  # relative to the gallery directory
    created_at: str  # ISO-8601 UTC
    quality: QualityReport

    def to_json_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "eye": self.eye,
            "template_path": self.template_path,
            "created_at": self.created_at,
            "quality": self.quality.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GalleryEntry":
        try:
            return cls(
                subject_id=str(data["subject_id"]),
                eye=str(data["eye"]),
                template_path=str(data["template_path"]),
                created_at=str(data["created_at"]),
                quality=QualityReport.from_json_dict(data["quality"]),
            )
        except (KeyError, TypeError) as e:
            raise GalleryError(f"malformed gallery entry: {e}") from None


def _check_eye_side(eye: str) -> str:
    if eye not in EYES:
        raise GalleryError(f"eye side must be one of {EYES}, got {eye!r}")
    return eye


class Gallery:
    """Directory-of-templates store with a JSON index."""

    def __init__(self, root):
        self.root = Path(root)

    @property
    def index_path(self) -> Path:
        return self.root / INDEX_NAME

    def load_index(self) -> Dict[Tuple[str, str], GalleryEntry]:
        if not self.index_path.exists():
            return {}
        try:
            raw = json.loads(self.index_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise GalleryError(f"cannot read gallery index {self.index_path}: {e}") from None
        if not isinstance(raw, list):
            raise GalleryError(f"gallery index {self.index_path} must be a JSON list")
        entries: Dict[Tuple[str, str], GalleryEntry] = {}
        for item in raw:
            entry = GalleryEntry.from_json_dict(item)
            key = (entry.subject_id, entry.eye)
            if key in entries:
                raise GalleryError(
                    f"gallery index lists {entry.subject_id}/{entry.eye} twice"
                )
            entries[key] = entry
        return entries

    def _write_index(self, entries: Dict[Tuple[str, str], GalleryEntry]) -> None:
        ordered = [entries[k].to_json_dict() for k in sorted(entries)]
        tmp = self.index_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(ordered, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.index_path)

    @contextmanager
    def lock(self):
        """Advisory single-writer lock; contention is an error, not a wait."""
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / LOCK_NAME
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise GalleryError(
                f"gallery {self.root} is locked by another writer "
                f"(stale lock? remove {lock_path})"
            ) from None
        try:
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            yield
        finally:
            try:
                os.unlink(lock_path)
            except OSError:
                pass

    def entries(self) -> List[GalleryEntry]:
        return [self.load_index()[k] for k in sorted(self.load_index())]

    def get(self, subject_id: str, eye: str) -> GalleryEntry:
        _check_eye_side(eye)
        entry = self.load_index().get((subject_id, eye))
        if entry is None:
            raise GalleryError(f"subject {subject_id!r} ({eye} eye) is not enrolled")
        return entry

    def template_for(self, entry: GalleryEntry) -> IrisTemplate:
        return load_template(self.root / entry.template_path)

    def store(self, subject_id: str, eye: str, template: IrisTemplate,
              report: QualityReport, replace: bool = False) -> GalleryEntry:
        """Persist a template that already passed the gate.

        The index and the template file are written under the writer lock;
        duplicates require ``replace``.
        """
        _check_eye_side(eye)
        with self.lock():
            entries = self.load_index()
            key = (subject_id, eye)
            if key in entries and not replace:
                raise GalleryError(
                    f"subject {subject_id!r} ({eye} eye) already enrolled; "
                    "pass --replace to overwrite"
                )
            rel = f"{subject_id}-{eye}.irt"
            save_template(template, self.root / rel)
            entry = GalleryEntry(
                subject_id=subject_id,
                eye=eye,
                template_path=rel,
                created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                quality=report,
            )
            entries[key] = entry
            self._write_index(entries)
        return entry


def _processed_or_refuse(eye_image: EyeImage, cfg: PipelineConfig,
                         mask: Optional[MaskImage]) -> ProcessedEye:
    done = process_eye(eye_image, cfg, mask=mask)
    if done.template is None:
        raise QualityGateError(done.gate.failures)
    return done


def enroll_image(gallery: Gallery, eye_image: EyeImage, subject_id: str,
                 eye: str, cfg: PipelineConfig,
                 mask: Optional[MaskImage] = None,
                 replace: bool = False) -> Tuple[GalleryEntry, ProcessedEye]:
    """Full image-to-stored-template flow; the gate refusal happens before
    any file is touched."""
    _check_eye_side(eye)
    done = _processed_or_refuse(eye_image, cfg, mask)
    entry = gallery.store(subject_id, eye, done.template, done.report, replace)
    return entry, done


def verify_image(gallery: Gallery, eye_image: EyeImage, subject_id: str,
                 eye: str, cfg: PipelineConfig,
                 mask: Optional[MaskImage] = None):
    """Probe pipeline plus match against the stored template.

    Returns (accepted, MatchResult, entry, ProcessedEye).  Unknown
    subjects raise before any image work happens.
    """
    entry = gallery.get(subject_id, eye)
    gallery_template = gallery.template_for(entry)
    done = _processed_or_refuse(eye_image, cfg, mask)
    result = match_shifted(done.template, gallery_template, cfg.max_shift)
    accepted = decide(result, cfg.decision)
    return accepted, result, entry, done
