"""Rigid / similarity motion fits and the hybrid model selector."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, DegenerateInputError
from .flow import TrackSet


class Kind(str, Enum):
    RIGID = "rigid"
    SIMILARITY = "similarity"


@dataclass(frozen=True)
class SimilarityTransform:
    """``p -> s * R(theta) @ p + (tx, ty)``; rotation is about the image origin."""

    tx: float = 0.0
    ty: float = 0.0
    theta: float = 0.0
    s: float = 1.0
    kind: Kind = Kind.SIMILARITY

    def __post_init__(self):
        if self.kind is Kind.RIGID and self.s != 1.0:
            raise ConfigError("rigid transforms must have s == 1")

    @classmethod
    def identity(cls, kind: Kind = Kind.RIGID) -> SimilarityTransform:
        return cls(0.0, 0.0, 0.0, 1.0, kind)

    @classmethod
    def from_matrix(cls, m: np.ndarray, kind: Kind = Kind.SIMILARITY) -> SimilarityTransform:
        """Read parameters back from a 2x3 ``[[a, -b, tx], [b, a, ty]]`` matrix."""
        a, b = float(m[0, 0]), float(m[1, 0])
        s = 1.0 if kind is Kind.RIGID else math.hypot(a, b)
        return cls(float(m[0, 2]), float(m[1, 2]), math.atan2(b, a), s, kind)

    def matrix(self) -> np.ndarray:
        c, s = self.s * math.cos(self.theta), self.s * math.sin(self.theta)
        return np.array([[c, -s, self.tx], [s, c, self.ty]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        m = self.matrix()
        return pts @ m[:, :2].T + m[:, 2]

    def inverse(self) -> SimilarityTransform:
        inv_s = 1.0 / self.s
        c, sn = math.cos(self.theta), math.sin(self.theta)
        tx = -inv_s * (c * self.tx + sn * self.ty)
        ty = -inv_s * (-sn * self.tx + c * self.ty)
        return SimilarityTransform(tx, ty, -self.theta, inv_s if self.kind is Kind.SIMILARITY else 1.0, self.kind)

    def compose(self, other: SimilarityTransform) -> SimilarityTransform:
        """``self ∘ other``: apply ``other`` first."""
        m = self.matrix()
        o = other.matrix()
        prod = m[:, :2] @ o[:, :2]
        t = m[:, :2] @ o[:, 2] + m[:, 2]
        kind = Kind.RIGID if self.kind is Kind.RIGID and other.kind is Kind.RIGID else Kind.SIMILARITY
        return SimilarityTransform.from_matrix(np.column_stack([prod, t]), kind)


@dataclass(frozen=True)
class DeltaParams:
    dx: float = 0.0
    dy: float = 0.0
    da: float = 0.0
    dls: float = 0.0
    kind: Kind = Kind.RIGID
    skipped: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.da, self.dls])

    @classmethod
    def skip(cls, kind: Kind = Kind.RIGID) -> DeltaParams:
        return cls(kind=kind, skipped=True)


def _procrustes(tracks: TrackSet):
    src = np.asarray(tracks.prev_points, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(tracks.cur_points, dtype=np.float64).reshape(-1, 2)
    if len(src) != len(dst):
        raise DegenerateInputError("point lists differ in length")
    if len(src) < 2:
        raise DegenerateInputError(f"need at least 2 point pairs, got {len(src)}")
    c_src = src.mean(axis=0)
    c_dst = dst.mean(axis=0)
    a = src - c_src
    b = dst - c_dst
    norm = float(np.sum(a * a))
    if norm <= 1e-12 * max(1.0, float(np.sum(src * src))):
        raise DegenerateInputError("source points are coincident")
    dot = float(np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]))
    cross = float(np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))
    theta = math.atan2(cross, dot)
    return theta, dot, cross, norm, c_src, c_dst


def _with_translation(theta: float, s: float, c_src, c_dst, kind: Kind) -> SimilarityTransform:
    c, sn = math.cos(theta), math.sin(theta)
    tx = c_dst[0] - s * (c * c_src[0] - sn * c_src[1])
    ty = c_dst[1] - s * (sn * c_src[0] + c * c_src[1])
    return SimilarityTransform(float(tx), float(ty), theta, s, kind)


def estimate_similarity(tracks: TrackSet) -> SimilarityTransform:
    """Closed-form least-squares similarity (2-D Procrustes with scale)."""
    theta, dot, cross, norm, c_src, c_dst = _procrustes(tracks)
    s = (math.cos(theta) * dot + math.sin(theta) * cross) / norm
    if not s > 0.0:
        raise DegenerateInputError("fitted scale is not positive")
    return _with_translation(theta, s, c_src, c_dst, Kind.SIMILARITY)


def estimate_rigid(tracks: TrackSet) -> SimilarityTransform:
    theta, _, _, _, c_src, c_dst = _procrustes(tracks)
    return _with_translation(theta, 1.0, c_src, c_dst, Kind.RIGID)


def rms_residual(tracks: TrackSet, t: SimilarityTransform) -> float:
    src = np.asarray(tracks.prev_points, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(tracks.cur_points, dtype=np.float64).reshape(-1, 2)
    if len(src) == 0:
        raise DegenerateInputError("cannot compute residual of an empty track set")
    err = dst - t.apply(src)
    return math.sqrt(float(np.mean(np.sum(err * err, axis=1))))


def extract_delta(t: SimilarityTransform) -> DeltaParams:
    dls = 0.0 if t.kind is Kind.RIGID else math.log(t.s)
    return DeltaParams(t.tx, t.ty, t.theta, dls, t.kind)


ESTIMATORS = {Kind.RIGID: estimate_rigid, Kind.SIMILARITY: estimate_similarity}


@dataclass
class ModelSelector:
    """Chooses rigid or similarity every ``dwell`` frame pairs and holds the choice.

    On a decision frame both models are fitted and rigid wins when
    ``E_r <= E_s * (1 + margin) + abs_tol``. Between decisions only the held
    model is fitted. ``mode`` forces a single model ("rigid"/"similarity").
    """

    dwell: int = 20
    margin: float = 0.05
    mode: str = "hybrid"
    abs_tol: float = 1e-9
    current_kind: Kind = Kind.RIGID
    frames_since_decision: int = 0
    usage_counts: Counter = field(default_factory=Counter)
    fits: Counter = field(default_factory=Counter)
    last_errors: tuple[float, float] | None = None

    def __post_init__(self):
        if self.dwell < 1:
            raise ConfigError("dwell must be >= 1")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.mode not in ("hybrid", "rigid", "similarity"):
            raise ConfigError(f"unknown model mode {self.mode!r}")
        if self.mode != "hybrid":
            self.current_kind = Kind(self.mode)

    @property
    def decision_due(self) -> bool:
        return self.frames_since_decision == 0

    @property
    def decisions(self) -> int:
        return sum(self.usage_counts.values())

    def _fit(self, kind: Kind, tracks: TrackSet) -> SimilarityTransform:
        self.fits[kind] += 1
        return ESTIMATORS[kind](tracks)

    def _advance(self) -> None:
        self.frames_since_decision = (self.frames_since_decision + 1) % self.dwell

    def select(self, tracks: TrackSet) -> SimilarityTransform:
        if self.decision_due:
            if self.mode == "hybrid":
                rigid = self._fit(Kind.RIGID, tracks)
                sim = self._fit(Kind.SIMILARITY, tracks)
                e_r = rms_residual(tracks, rigid)
                e_s = rms_residual(tracks, sim)
                self.last_errors = (e_r, e_s)
                if e_r <= e_s * (1.0 + self.margin) + self.abs_tol:
                    self.current_kind, chosen = Kind.RIGID, rigid
                else:
                    self.current_kind, chosen = Kind.SIMILARITY, sim
            else:
                chosen = self._fit(self.current_kind, tracks)
            self.usage_counts[self.current_kind] += 1
        else:
            chosen = self._fit(self.current_kind, tracks)
        self._advance()
        return chosen

    def skip(self) -> None:
        """Account for a frame with no usable tracks; a due decision keeps the held model."""
        if self.decision_due:
            self.usage_counts[self.current_kind] += 1
        self._advance()
