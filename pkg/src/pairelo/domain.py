"""Core data types for pairwise image-quality studies.

Pure value types plus study-config validation; no behavior beyond
construction, validation, and dict/JSON round-tripping.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from typing import Any, Literal

from .errors import ConfigError
from .validation import check_positive, check_probability

SUBSAMPLINGS = ("yuv444", "yuv422", "yuv420")
KNOWN_ENCODERS = ("jpegli", "libjpeg-turbo", "mozjpeg")

# Sentinel side tokens for golden questions.  These are never valid method
# ids (method ids always contain "-q<quality>-").
ORIGINAL = "original"
_METHOD_ID_RE = re.compile(r"^(?P<encoder>.+)-q(?P<quality>\d+)-(?P<sub>yuv4\d{2})$")
_HEAVY_ID_RE = re.compile(r"^degraded-q(?P<quality>\d+)$")


def method_id(encoder: str, quality: int, subsampling: str) -> str:
    """Canonical method id, e.g. ``jpegli-q85-yuv444``."""
    return f"{encoder}-q{quality}-{subsampling}"


def parse_method_id(mid: str) -> tuple[str, int, str]:
    m = _METHOD_ID_RE.match(mid)
    if m is None:
        raise ValueError(f"not a canonical method id: {mid!r}")
    return m.group("encoder"), int(m.group("quality")), m.group("sub")


def heavy_degraded_id(quality: int) -> str:
    """Side token for the heavily degraded golden variant."""
    return f"degraded-q{quality}"


def is_heavy_degraded(token: str) -> bool:
    return _HEAVY_ID_RE.match(token) is not None


@dataclass(frozen=True)
class Method:
    """One degradation setting; the unit that receives an Elo score."""

    id: str
    encoder: str
    quality: int
    subsampling: str
    mean_bpp: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Method":
        return cls(**d)


@dataclass(frozen=True)
class ImageRef:
    id: str
    width: int
    height: int
    source_path: str = ""

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image {self.id!r}: dimensions must be positive")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ImageRef":
        return cls(**d)


@dataclass(frozen=True)
class Question:
    """A scheduled comparison assigned to one rater.

    ``left``/``right`` are method ids, or for golden questions the
    ``ORIGINAL`` / ``degraded-q<N>`` sentinels (one each).
    """

    id: str
    image: str
    left: str
    right: str
    golden: bool
    rater: str
    issued_at: float = 0.0

    def __post_init__(self):
        sides = {self.left, self.right}
        is_golden_pair = ORIGINAL in sides and any(is_heavy_degraded(s) for s in sides)
        if self.golden != is_golden_pair:
            raise ValueError(
                f"question {self.id!r}: golden flag inconsistent with sides "
                f"({self.left!r} vs {self.right!r})"
            )
        if not self.golden and self.left == self.right:
            raise ValueError(f"question {self.id!r}: sides must be distinct methods")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Question":
        return cls(**d)


@dataclass(frozen=True)
class Answer:
    """One forced-choice response to an issued question."""

    question: str
    rater: str
    choice: Literal["left", "right"]
    answered_at: float = 0.0
    toggles: int = 0

    def __post_init__(self):
        if self.choice not in ("left", "right"):
            raise ValueError(f"choice must be 'left' or 'right', got {self.choice!r}")
        if self.toggles < 0:
            raise ValueError("toggles must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Answer":
        return cls(**d)


@dataclass(frozen=True)
class Comparison:
    """A resolved answer: the pair compared, who answered, and the choice.

    This is the unit the fitter consumes.  Golden comparisons are
    normalized so that ``left`` is always the ORIGINAL side.
    """

    rater: str
    left: str
    right: str
    choice: Literal["left", "right"]
    golden: bool = False
    image: str = ""
    toggles: int = 0

    def __post_init__(self):
        if self.choice not in ("left", "right"):
            raise ValueError(f"choice must be 'left' or 'right', got {self.choice!r}")
        if self.golden and self.left != ORIGINAL:
            raise ValueError("golden comparisons must be normalized with left=ORIGINAL")

    @property
    def winner(self) -> str:
        return self.left if self.choice == "left" else self.right

    @property
    def loser(self) -> str:
        return self.right if self.choice == "left" else self.left

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Comparison":
        return cls(**d)


@dataclass
class RaterState:
    rater: str
    golden_shown: int = 0
    golden_wrong: int = 0
    blocked: bool = False
    answers_given: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RaterState":
        return cls(**d)


@dataclass(frozen=True)
class EloEstimate:
    """Fitted Elo for one method with a central credible interval."""

    method: str
    elo: float
    p99_low: float
    p99_high: float

    def __post_init__(self):
        if not self.p99_low <= self.elo <= self.p99_high:
            raise ValueError(
                f"{self.method}: interval [{self.p99_low}, {self.p99_high}] "
                f"must bracket elo {self.elo}"
            )

    @property
    def half_width(self) -> float:
        return (self.p99_high - self.p99_low) / 2.0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EloEstimate":
        return cls(**d)


@dataclass
class EloFit:
    """Result of one batch MAP fit."""

    estimates: list[EloEstimate]
    rater_noise: dict[str, float]
    log_posterior: float
    config_fingerprint: str = ""
    interval_level: float = 0.99
    n_answers: int = 0
    converged: bool = True
    n_iter: int = 0
    grad_norm: float = 0.0
    warnings: list[str] = field(default_factory=list)
    #: posterior covariance of the centered elos, row order = estimates
    #: order; None for fits assembled without one (intervals only)
    elo_cov: list[list[float]] | None = None

    def elo_of(self, method: str) -> float:
        return self._by_method()[method].elo

    def estimate_of(self, method: str) -> EloEstimate:
        return self._by_method()[method]

    def elo_covariance(self, a: str, b: str) -> float | None:
        """Posterior covariance of two methods' elos, if stored."""
        if self.elo_cov is None:
            return None
        order = {e.method: i for i, e in enumerate(self.estimates)}
        return self.elo_cov[order[a]][order[b]]

    def _by_method(self) -> dict[str, EloEstimate]:
        return {e.method: e for e in self.estimates}

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["estimates"] = [e.to_dict() for e in self.estimates]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EloFit":
        d = dict(d)
        d["estimates"] = [EloEstimate.from_dict(e) for e in d["estimates"]]
        return cls(**d)


@dataclass(frozen=True)
class Priors:
    """Gauge-fixing and regularization for the preference model.

    Elo scores get a Gaussian prior (pins the translation gauge at
    ``elo_mean``); per-rater noise gets a Beta prior weakly favoring
    reliable raters.
    """

    elo_mean: float = 2000.0
    elo_sd: float = 800.0
    noise_alpha: float = 1.0
    noise_beta: float = 9.0

    def __post_init__(self):
        check_positive("elo_sd", self.elo_sd)
        check_positive("noise_alpha", self.noise_alpha)
        check_positive("noise_beta", self.noise_beta)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Priors":
        return cls(**d)


@dataclass(frozen=True)
class GoldenSettings:
    heavy_quality: int = 50
    rate: float = 0.1
    threshold: int = 3

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GoldenSettings":
        return cls(**d)


@dataclass(frozen=True)
class SchedulerSettings:
    refresh_every: int = 50
    repeat_window: int = 10
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SchedulerSettings":
        return cls(**d)


@dataclass(frozen=True)
class FitterSettings:
    gtol: float = 1e-6
    max_iter: int = 10_000
    golden_gap: float = 800.0
    noise_max: float = 1.0
    interval_level: float = 0.99

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FitterSettings":
        return cls(**d)


@dataclass
class StudyConfig:
    """Validated study description; build via :func:`validate_study_config`."""

    methods: list[Method]
    images: list[ImageRef] = field(default_factory=list)
    study: str = "study"
    golden: GoldenSettings = field(default_factory=GoldenSettings)
    scheduler: SchedulerSettings = field(default_factory=SchedulerSettings)
    priors: Priors = field(default_factory=Priors)
    fitter: FitterSettings = field(default_factory=FitterSettings)
    quality_grid: tuple[int, int] = (1, 100)

    def method_ids(self) -> list[str]:
        return [m.id for m in self.methods]

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def to_dict(self) -> dict[str, Any]:
        return {
            "study": self.study,
            "methods": [m.to_dict() for m in self.methods],
            "images": [i.to_dict() for i in self.images],
            "golden": self.golden.to_dict(),
            "scheduler": self.scheduler.to_dict(),
            "priors": self.priors.to_dict(),
            "fitter": self.fitter.to_dict(),
            "quality_grid": list(self.quality_grid),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StudyConfig":
        return validate_study_config(d)


def validate_study_config(raw: dict[str, Any] | StudyConfig) -> StudyConfig:
    """Normalize and validate a study description.

    Fills documented defaults (golden quality 50, golden rate 0.1,
    threshold 3, refresh every 50 answers, repeat window min(10, n_images-1),
    standard priors) and returns a :class:`StudyConfig`, or raises
    :class:`ConfigError` carrying every problem found.
    """
    if isinstance(raw, StudyConfig):
        raw = raw.to_dict()
    errors: list[str] = []

    grid = tuple(raw.get("quality_grid", (1, 100)))
    if len(grid) != 2 or grid[0] > grid[1]:
        errors.append(f"quality_grid must be (lo, hi), got {grid!r}")
        grid = (1, 100)

    methods: list[Method] = []
    seen_ids: set[str] = set()
    raw_methods = raw.get("methods", [])
    if not raw_methods:
        errors.append("empty method set")
    for i, m in enumerate(raw_methods):
        if isinstance(m, Method):
            m = m.to_dict()
        encoder = m.get("encoder")
        quality = m.get("quality")
        subsampling = m.get("subsampling")
        mid = m.get("id")
        if mid and (encoder is None or quality is None or subsampling is None):
            try:
                encoder, quality, subsampling = parse_method_id(mid)
            except ValueError as exc:
                errors.append(f"method[{i}]: {exc}")
                continue
        if encoder is None or quality is None or subsampling is None:
            errors.append(f"method[{i}]: needs id or (encoder, quality, subsampling)")
            continue
        canonical = method_id(encoder, int(quality), subsampling)
        if mid is None:
            mid = canonical
        elif mid != canonical:
            errors.append(f"method[{i}]: id {mid!r} does not match canonical {canonical!r}")
        if subsampling not in SUBSAMPLINGS:
            errors.append(f"method {mid!r}: unknown subsampling {subsampling!r}")
        if not grid[0] <= int(quality) <= grid[1]:
            errors.append(f"method {mid!r}: quality {quality} outside grid {grid}")
        if mid in seen_ids:
            errors.append(f"duplicate method id {mid!r}")
        seen_ids.add(mid)
        mean_bpp = m.get("mean_bpp")
        if mean_bpp is not None and mean_bpp <= 0:
            errors.append(f"method {mid!r}: mean_bpp must be > 0 when present")
        methods.append(
            Method(id=mid, encoder=encoder, quality=int(quality),
                   subsampling=subsampling, mean_bpp=mean_bpp)
        )

    images: list[ImageRef] = []
    for i, img in enumerate(raw.get("images", [])):
        if isinstance(img, ImageRef):
            images.append(img)
            continue
        try:
            images.append(ImageRef.from_dict(img))
        except (TypeError, ValueError) as exc:
            errors.append(f"image[{i}]: {exc}")

    golden_raw = dict(raw.get("golden", {}))
    golden = GoldenSettings(
        heavy_quality=int(golden_raw.get("heavy_quality", 50)),
        rate=float(golden_raw.get("rate", 0.1)),
        threshold=int(golden_raw.get("threshold", 3)),
    )
    if golden.threshold < 1:
        errors.append(f"golden threshold must be >= 1, got {golden.threshold}")
    try:
        check_probability("golden rate", golden.rate)
    except ValueError as exc:
        errors.append(str(exc))

    sched_raw = dict(raw.get("scheduler", {}))
    window = sched_raw.get("repeat_window")
    if window is None:
        # Default window must leave at least one eligible image.
        window = min(10, max(0, len(images) - 1))
    scheduler = SchedulerSettings(
        refresh_every=int(sched_raw.get("refresh_every", 50)),
        repeat_window=int(window),
        seed=int(sched_raw.get("seed", 0)),
    )
    if scheduler.refresh_every < 1:
        errors.append("scheduler refresh_every must be >= 1")
    if scheduler.repeat_window < 0:
        errors.append("scheduler repeat_window must be >= 0")

    try:
        priors = Priors.from_dict(dict(raw.get("priors", {})))
    except (TypeError, ValueError) as exc:
        errors.append(f"priors: {exc}")
        priors = Priors()
    try:
        fitter = FitterSettings.from_dict(dict(raw.get("fitter", {})))
    except TypeError as exc:
        errors.append(f"fitter: {exc}")
        fitter = FitterSettings()

    if errors:
        raise ConfigError(errors)

    return StudyConfig(
        methods=methods,
        images=images,
        study=str(raw.get("study", "study")),
        golden=golden,
        scheduler=scheduler,
        priors=priors,
        fitter=fitter,
        quality_grid=(int(grid[0]), int(grid[1])),
    )
