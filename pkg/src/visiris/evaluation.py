"""Evaluation harness: manifests, pairing protocols, ROC, and TAR@FAR.

A manifest is a CSV of image paths plus capture metadata; identity fields
are parsed out of the filename stem.  Pair builders implement the three
comparison protocols (same spectrum, NIR-enrollment cross-spectral, and
25 cm-enrollment cross-distance), scores come from the shifted masked
Hamming distance, and the ROC sweep is computed over all distinct score
thresholds with sentinels at both ends.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ProtocolError
from .matching import DEFAULT_MAX_SHIFT, match_shifted
from .template import IrisTemplate

PROTOCOL_SAME_SPECTRUM = "same-spectrum"
PROTOCOL_CROSS_SPECTRAL = "cross-spectral"
PROTOCOL_CROSS_DISTANCE = "cross-distance"
PROTOCOLS = (PROTOCOL_SAME_SPECTRUM, PROTOCOL_CROSS_SPECTRAL,
             PROTOCOL_CROSS_DISTANCE)

SPECTRA = ("VIS", "NIR")
EYES = ("left", "right")

GENUINE = "genuine"
IMPOSTER = "imposter"

FAR_TARGETS = (1e-4, 1e-3, 1e-2)


@dataclass(frozen=True)
class DatasetRecord:
    """One manifest row; identity fields come from the filename stem.

    ``template_path`` is the artifact this record scores with.  Manifests
    list source images there; the harness swaps in built templates before
    scoring.
    """

    subject_id: str
    eye: str
    spoof: str
    session_id: str
    trial: int
    spectrum: str
    capture_distance_cm: Optional[int]
    iris_color: str
    template_path: str

    def key(self):
        return (self.subject_id, self.eye, self.spectrum, self.session_id,
                self.trial)

    def stem(self) -> str:
        return f"{self.subject_id}-{self.eye}-{self.spoof}-{self.session_id}-{self.trial}"


def parse_stem(stem: str):
    """Split subject-eye-spoof-session-trial; raises ValueError on bad stems."""
    parts = stem.split("-")
    if len(parts) != 5:
        raise ValueError(f"expected 5 dash-separated fields, got {len(parts)}")
    subject, eye, spoof, session, trial_text = parts
    if eye not in EYES:
        raise ValueError(f"eye must be left or right, got {eye!r}")
    if not all(parts):
        raise ValueError("empty field in filename stem")
    try:
        trial = int(trial_text)
    except ValueError:
        raise ValueError(f"trial must be an integer, got {trial_text!r}") from None
    return subject, eye, spoof, session, trial


def parse_manifest(path) -> Tuple[List[DatasetRecord], List[Tuple[int, str, str]]]:
    """Read a manifest CSV; malformed rows go to the rejects list, not errors.

    Returns (records, rejects) where each reject is (line number, path
    column value, reason).
    """
    try:
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            rows = list(reader)
    except OSError as e:
        raise ProtocolError(f"cannot read manifest {path}: {e}") from None
    if not rows:
        raise ProtocolError(f"manifest {path} is empty")
    header = [c.strip() for c in rows[0]]
    expected = ["path", "spectrum", "distance_cm", "iris_color"]
    if header != expected:
        raise ProtocolError(
            f"manifest header must be {','.join(expected)}, got {','.join(header)}"
        )
    records: List[DatasetRecord] = []
    rejects: List[Tuple[int, str, str]] = []
    seen = set()
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            rejects.append((line_no, ",".join(row), "wrong column count"))
            continue
        raw_path, spectrum, distance_text, color = (c.strip() for c in row)
        try:
            subject, eye, spoof, session, trial = parse_stem(Path(raw_path).stem)
        except ValueError as e:
            rejects.append((line_no, raw_path, str(e)))
            continue
        spectrum = spectrum.upper()
        if spectrum not in SPECTRA:
            rejects.append((line_no, raw_path, f"unknown spectrum {spectrum!r}"))
            continue
        if distance_text in ("", "unknown"):
            distance = None
        else:
            try:
                distance = int(distance_text)
            except ValueError:
                rejects.append((line_no, raw_path, f"bad distance {distance_text!r}"))
                continue
        rec = DatasetRecord(
            subject_id=subject, eye=eye, spoof=spoof, session_id=session,
            trial=trial, spectrum=spectrum, capture_distance_cm=distance,
            iris_color=color or "unknown", template_path=raw_path,
        )
        if rec.key() in seen:
            rejects.append((line_no, raw_path, "duplicate identity key"))
            continue
        seen.add(rec.key())
        records.append(rec)
    if not records:
        raise ProtocolError(f"manifest {path} contains no valid records")
    return records, rejects


@dataclass(frozen=True)
class PairSet:
    genuine: Tuple[Tuple[DatasetRecord, DatasetRecord], ...]
    imposter: Tuple[Tuple[DatasetRecord, DatasetRecord], ...]

    def __post_init__(self):
        object.__setattr__(self, "genuine", tuple(self.genuine))
        object.__setattr__(self, "imposter", tuple(self.imposter))


def _sorted_group(records: Sequence[DatasetRecord]) -> List[DatasetRecord]:
    return sorted(records, key=lambda r: (r.session_id, r.trial))


def _group_by(records, key_fn) -> Dict:
    groups: Dict = {}
    for r in records:
        groups.setdefault(key_fn(r), []).append(r)
    return groups


def _imposter_pairs(enroll_by_subject: Dict, verify_records, rng) -> List:
    """Each subject's seeded-random enrollment vs every other subject's records."""
    pairs = []
    for subject in sorted(enroll_by_subject):
        pool = enroll_by_subject[subject]
        enroll = pool[int(rng.integers(0, len(pool)))]
        for v in verify_records:
            if v.subject_id == subject or v.eye != enroll.eye:
                continue
            pairs.append((enroll, v))
    return pairs


def build_pairs(records: Sequence[DatasetRecord], protocol: str,
                seed: int = 0) -> PairSet:
    """Generate genuine and imposter comparisons for a protocol.

    Genuine enrollment is the first sample of each (subject, eye) group;
    imposter enrollments are chosen by a seeded RNG, and imposters only
    compare like against like eyes.
    """
    if protocol not in PROTOCOLS:
        raise ProtocolError(
            f"unknown protocol {protocol!r}; expected one of {', '.join(PROTOCOLS)}"
        )
    rng = np.random.default_rng(seed)
    subjects = {r.subject_id for r in records}
    if len(subjects) < 2:
        raise ProtocolError("imposter set empty: need at least 2 subjects")

    genuine: List[Tuple[DatasetRecord, DatasetRecord]] = []

    if protocol == PROTOCOL_SAME_SPECTRUM:
        groups = _group_by(records, lambda r: (r.subject_id, r.eye, r.spectrum))
        enroll_by_subject: Dict = {}
        verify_all: List[DatasetRecord] = []
        for key in sorted(groups):
            members = _sorted_group(groups[key])
            if len(members) >= 2:
                genuine.extend((members[0], v) for v in members[1:])
            enroll_by_subject.setdefault(key[0], []).extend(members)
            verify_all.extend(members)
        imposter = []
        for subject in sorted(enroll_by_subject):
            pool = enroll_by_subject[subject]
            enroll = pool[int(rng.integers(0, len(pool)))]
            for v in verify_all:
                if (v.subject_id != subject and v.eye == enroll.eye
                        and v.spectrum == enroll.spectrum):
                    imposter.append((enroll, v))
    elif protocol == PROTOCOL_CROSS_SPECTRAL:
        nir = [r for r in records if r.spectrum == "NIR"]
        vis = [r for r in records if r.spectrum == "VIS"]
        if not nir:
            raise ProtocolError("cross-spectral protocol needs NIR records")
        if not vis:
            raise ProtocolError("cross-spectral protocol needs VIS records")
        nir_groups = _group_by(nir, lambda r: (r.subject_id, r.eye))
        vis_groups = _group_by(vis, lambda r: (r.subject_id, r.eye))
        enroll_by_subject = {}
        for key in sorted(nir_groups):
            members = _sorted_group(nir_groups[key])
            enroll = members[0]
            for v in _sorted_group(vis_groups.get(key, [])):
                genuine.append((enroll, v))
            enroll_by_subject.setdefault(key[0], []).extend(members)
        imposter = _imposter_pairs(enroll_by_subject, _sorted_group(vis), rng)
    else:  # cross-distance
        with_distance = [r for r in records if r.capture_distance_cm is not None]
        near = [r for r in with_distance if r.capture_distance_cm == 25]
        if not near:
            raise ProtocolError("cross-distance protocol needs 25 cm records")
        groups = _group_by(with_distance, lambda r: (r.subject_id, r.eye, r.spectrum))
        enroll_by_subject = {}
        verify_all = []
        for key in sorted(groups):
            members = _sorted_group(groups[key])
            near_members = [r for r in members if r.capture_distance_cm == 25]
            if near_members:
                enroll = near_members[0]
                genuine.extend(
                    (enroll, v) for v in members if v is not enroll
                )
                enroll_by_subject.setdefault(key[0], []).extend(near_members)
            verify_all.extend(members)
        if len(enroll_by_subject) < 2:
            raise ProtocolError(
                "cross-distance protocol needs 25 cm enrollments for >= 2 subjects"
            )
        imposter = []
        for subject in sorted(enroll_by_subject):
            pool = enroll_by_subject[subject]
            enroll = pool[int(rng.integers(0, len(pool)))]
            for v in verify_all:
                if (v.subject_id != subject and v.eye == enroll.eye
                        and v.spectrum == enroll.spectrum):
                    imposter.append((enroll, v))

    if not imposter:
        raise ProtocolError("imposter set empty")
    return PairSet(tuple(genuine), tuple(imposter))


@dataclass(frozen=True)
class ScoredPair:
    label: str
    hd: float
    enroll: DatasetRecord
    verify: DatasetRecord


def score_pairs(pairs: PairSet,
                lookup: Callable[[DatasetRecord], IrisTemplate],
                max_shift: int = DEFAULT_MAX_SHIFT):
    """Score every pair; failures become exceptions instead of scores.

    ``lookup`` maps a record to its template and may raise; any exception
    from lookup or matching moves the pair to the exceptions list (with a
    reason) rather than aborting the run.  Returns (scored, exceptions).
    """
    scored: List[ScoredPair] = []
    exceptions: List[Tuple[str, str, str]] = []

    def run(label, pair_list):
        for enroll, verify in pair_list:
            try:
                r = match_shifted(lookup(enroll), lookup(verify), max_shift)
            except Exception as e:
                exceptions.append((enroll.stem(), verify.stem(), str(e)))
                continue
            scored.append(ScoredPair(label, r.hd, enroll, verify))

    run(GENUINE, pairs.genuine)
    run(IMPOSTER, pairs.imposter)
    return scored, exceptions


def as_score_tuples(scored: Sequence[ScoredPair]) -> List[Tuple[str, float]]:
    return [(s.label, s.hd) for s in scored]


@dataclass(frozen=True)
class RocCurve:
    thresholds: Tuple[float, ...]
    far: Tuple[float, ...]
    tar: Tuple[float, ...]

    def __post_init__(self):
        t, f, g = (tuple(getattr(self, n)) for n in ("thresholds", "far", "tar"))
        if not (len(t) == len(f) == len(g)) or not t:
            raise ValueError("curve arrays must be non-empty and equal length")
        if list(t) != sorted(t):
            raise ValueError("thresholds must be sorted")
        for series in (f, g):
            if any(b < a for a, b in zip(series, series[1:])):
                raise ValueError("far/tar must be monotone in threshold")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "far", f)
        object.__setattr__(self, "tar", g)


def compute_roc(scores: Sequence[Tuple[str, float]]) -> RocCurve:
    """Threshold sweep over all distinct scores plus sentinels.

    far(t) is the fraction of imposter scores <= t; tar(t) the fraction of
    genuine scores <= t.
    """
    genuine = np.sort([hd for label, hd in scores if label == GENUINE])
    imposter = np.sort([hd for label, hd in scores if label == IMPOSTER])
    if genuine.size == 0 or imposter.size == 0:
        raise ProtocolError("ROC needs at least one genuine and one imposter score")
    all_scores = np.concatenate([genuine, imposter])
    interior = np.unique(all_scores)
    thresholds = np.concatenate(
        [[all_scores.min() - 1.0], interior, [all_scores.max() + 1.0]]
    )
    tar = np.searchsorted(genuine, thresholds, side="right") / genuine.size
    far = np.searchsorted(imposter, thresholds, side="right") / imposter.size
    return RocCurve(tuple(thresholds.tolist()), tuple(far.tolist()),
                    tuple(tar.tolist()))


def tar_at_far(curve: RocCurve, far_target: float) -> float:
    """TAR at the largest threshold whose FAR stays within the target."""
    best = 0.0
    for f, t in zip(curve.far, curve.tar):
        if f <= far_target:
            best = t  # thresholds ascend, so the last qualifying wins
    return best


def write_roc_csv(path, curve: RocCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["threshold", "far", "tar"])
        for row in zip(curve.thresholds, curve.far, curve.tar):
            writer.writerow([repr(v) for v in row])


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def summarize_scores(scores: Sequence[Tuple[str, float]]) -> dict:
    """TAR@FAR table plus class means for one score list."""
    genuine = [hd for label, hd in scores if label == GENUINE]
    imposter = [hd for label, hd in scores if label == IMPOSTER]
    out = {
        "genuine_count": len(genuine),
        "imposter_count": len(imposter),
        "mean_genuine_hd": _mean(genuine),
        "mean_imposter_hd": _mean(imposter),
        "tar_at_far": None,
    }
    if genuine and imposter:
        curve = compute_roc(scores)
        out["tar_at_far"] = {
            repr(target): tar_at_far(curve, target) for target in FAR_TARGETS
        }
    return out


def split_reports(scored: Sequence[ScoredPair],
                  pair_attr: Callable[[DatasetRecord], object]) -> dict:
    """Sub-reports grouped by an attribute of the verification record.

    Groups with only one class of score still get counts and means; their
    TAR@FAR entry is None because a one-sided ROC is undefined.
    """
    out: Dict[object, List[Tuple[str, float]]] = {}
    for s in scored:
        out.setdefault(pair_attr(s.verify), []).append((s.label, s.hd))
    return {str(k): summarize_scores(v)
            for k, v in sorted(out.items(), key=lambda kv: str(kv[0]))}
