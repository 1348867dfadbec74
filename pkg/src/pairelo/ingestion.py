"""Ratings-file parsing and degraded-corpus construction.

Raw ratings arrive as delimited text with site-specific column names; a
ColumnMapping (guessed from the header or supplied explicitly) turns each
row into a Comparison.  Corpus building shells out to external encoders
through command templates and records sizes and bits per pixel in a
manifest.
"""

from __future__ import annotations

import csv
import io
import os
import shlex
import shutil
import statistics
import string
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .analysis import bits_per_pixel
from .domain import ORIGINAL, Comparison, ImageRef, Method, is_heavy_degraded
from .errors import (
    CapabilityError,
    CommandError,
    ConfigError,
    IncompleteManifestError,
    MappingError,
)

# Header synonyms used when guessing a mapping, keyed by canonical field.
_SYNONYMS = {
    "rater": ("rater", "raterid", "user", "userid", "worker", "workerid",
              "evaluator", "annotator", "judge"),
    "image": ("image", "imagename", "imageid", "img", "picture", "source"),
    "method_a": ("methoda", "method1", "a", "left", "first", "optiona",
                 "variant_a", "varianta"),
    "method_b": ("methodb", "method2", "b", "right", "second", "optionb",
                 "variant_b", "variantb"),
    "choice": ("choice", "answer", "preferred", "winner", "selected",
               "preference", "vote", "picked"),
    "golden": ("golden", "isgolden", "gold", "control"),
    "toggles": ("toggles", "flips", "togglecount", "numflips"),
}

_CHOICE_A = {"a", "left", "l", "0", "first", "method_a", "methoda", "1st"}
_CHOICE_B = {"b", "right", "r", "1", "second", "method_b", "methodb", "2nd"}
_TRUE_TOKENS = {"1", "true", "t", "yes", "y", "golden"}
_FALSE_TOKENS = {"0", "false", "f", "no", "n", ""}


def _normalize(name: str) -> str:
    return name.strip().lower().replace("_", "").replace("-", "").replace(" ", "")


@dataclass(frozen=True)
class ColumnMapping:
    """Canonical field -> source column, plus choice-token semantics.

    ``golden``, ``image``, and ``toggles`` columns are optional.  Choice
    cells may hold side labels (a/b, left/right) or a method id matching
    one side of the row.
    """

    rater: str
    method_a: str
    method_b: str
    choice: str
    image: str | None = None
    golden: str | None = None
    toggles: str | None = None

    def required_columns(self) -> list[str]:
        return [self.rater, self.method_a, self.method_b, self.choice]

    def validate(self, header: Sequence[str]) -> None:
        have = set(header)
        missing = [c for c in self.required_columns() if c not in have]
        missing += [c for c in (self.image, self.golden, self.toggles)
                    if c is not None and c not in have]
        if missing:
            raise MappingError(
                f"mapped columns missing from header {sorted(have)}: {missing}"
            )

    @classmethod
    def guess(cls, header: Sequence[str]) -> "ColumnMapping":
        """Pick columns by common-name synonyms; raise when the required
        four (rater, two methods, choice) cannot all be found."""
        found: dict[str, str] = {}
        for column in header:
            norm = _normalize(column)
            for fieldname, names in _SYNONYMS.items():
                if fieldname not in found and norm in names:
                    found[fieldname] = column
        missing = [f for f in ("rater", "method_a", "method_b", "choice")
                   if f not in found]
        if missing:
            raise MappingError(
                f"could not guess columns for {missing} from header {list(header)}"
            )
        return cls(
            rater=found["rater"],
            method_a=found["method_a"],
            method_b=found["method_b"],
            choice=found["choice"],
            image=found.get("image"),
            golden=found.get("golden"),
            toggles=found.get("toggles"),
        )


@dataclass(frozen=True)
class MalformedRow:
    line: int
    reason: str
    raw: dict[str, Any]


@dataclass
class IngestStats:
    """Bookkeeping from one parse: totals, per-rater counts, rejects."""

    n_rows: int = 0
    n_answers: int = 0
    golden_count: int = 0
    per_rater: dict[str, int] = field(default_factory=dict)
    methods: list[str] = field(default_factory=list)
    malformed: list[MalformedRow] = field(default_factory=list)

    @property
    def n_raters(self) -> int:
        return len(self.per_rater)

    def count_summary(self) -> dict[str, float]:
        counts = sorted(self.per_rater.values())
        if not counts:
            return {"min": 0, "max": 0, "mean": 0.0, "median": 0.0}
        return {
            "min": counts[0],
            "max": counts[-1],
            "mean": statistics.mean(counts),
            "median": statistics.median(counts),
        }


def _decode_choice(token: str, method_a: str, method_b: str) -> str | None:
    t = token.strip()
    if t == method_a:
        return "left"
    if t == method_b:
        return "right"
    low = t.lower()
    if low in _CHOICE_A:
        return "left"
    if low in _CHOICE_B:
        return "right"
    return None


def parse_answers(
    source: str | Path | io.TextIOBase,
    mapping: ColumnMapping | None = None,
    study_methods: Iterable[str] | None = None,
) -> tuple[list[Comparison], IngestStats]:
    """Read a delimited ratings file into Comparisons plus stats.

    Total over the input: every data row lands either in the answer list
    or in ``stats.malformed`` with its line number and reason.  Golden rows
    are normalized so the original is the left side.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return parse_answers(fh, mapping, study_methods)

    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise MappingError("empty ratings file (no header row)")
    if mapping is None:
        mapping = ColumnMapping.guess(reader.fieldnames)
    else:
        mapping.validate(reader.fieldnames)
    known = set(study_methods) if study_methods is not None else None

    answers: list[Comparison] = []
    stats = IngestStats()
    seen_methods: set[str] = set()

    for row in reader:
        stats.n_rows += 1
        line = reader.line_num

        def reject(reason: str) -> None:
            stats.malformed.append(MalformedRow(line=line, reason=reason, raw=dict(row)))

        rater = (row.get(mapping.rater) or "").strip()
        side_a = (row.get(mapping.method_a) or "").strip()
        side_b = (row.get(mapping.method_b) or "").strip()
        raw_choice = (row.get(mapping.choice) or "").strip()
        if not rater:
            reject("missing rater")
            continue
        if not side_a or not side_b:
            reject("missing method id")
            continue
        if side_a == side_b:
            reject("identical sides")
            continue

        choice = _decode_choice(raw_choice, side_a, side_b)
        if choice is None:
            reject(f"unknown choice token {raw_choice!r}")
            continue

        golden = ORIGINAL in (side_a, side_b)
        if mapping.golden is not None:
            flag = (row.get(mapping.golden) or "").strip().lower()
            if flag in _TRUE_TOKENS:
                golden = True
            elif flag not in _FALSE_TOKENS:
                reject(f"unknown golden flag {flag!r}")
                continue

        if golden:
            if side_a == ORIGINAL:
                left, right = side_a, side_b
            elif side_b == ORIGINAL:
                left, right = side_b, side_a
                choice = "left" if choice == "right" else "right"
            else:
                reject("golden row without an original side")
                continue
        else:
            left, right = side_a, side_b
            if known is not None and not {left, right} <= known:
                unknown = sorted({left, right} - known)
                reject(f"methods not in study config: {unknown}")
                continue

        toggles = 0
        if mapping.toggles is not None:
            raw_toggles = (row.get(mapping.toggles) or "").strip()
            if raw_toggles:
                try:
                    toggles = max(0, int(float(raw_toggles)))
                except ValueError:
                    reject(f"bad toggle count {raw_toggles!r}")
                    continue

        image = (row.get(mapping.image) or "").strip() if mapping.image else ""
        answers.append(Comparison(
            rater=rater, left=left, right=right, choice=choice,
            golden=golden, image=image, toggles=toggles,
        ))
        stats.n_answers += 1
        stats.per_rater[rater] = stats.per_rater.get(rater, 0) + 1
        if golden:
            stats.golden_count += 1
        else:
            seen_methods.update((left, right))

    stats.methods = sorted(seen_methods)
    return answers, stats


# --- corpus building ---------------------------------------------------------

#: Chroma subsampling spellings per tool convention: cjpegli wants bare
#: digits ("444"), ImageMagick wants the colon form ("4:4:4").
_CHROMA_DIGITS = {"yuv444": "444", "yuv422": "422", "yuv420": "420"}
_SAMPLING_FACTOR = {"yuv444": "4:4:4", "yuv422": "4:2:2", "yuv420": "4:2:0"}

DEFAULT_TEMPLATES = {
    "jpegli": "cjpegli {input} {output} --quality {quality} --chroma_subsampling={chroma}",
    "libjpeg-turbo": (
        "env LD_LIBRARY_PATH=$HOME/libjpeg-turbo/build/ convert {input} "
        "-quality {quality} -sampling-factor {subsampling} {output}"
    ),
    "mozjpeg": (
        "env LD_LIBRARY_PATH=$HOME/mozjpeg/build/ convert {input} "
        "-quality {quality} -sampling-factor {subsampling} {output}"
    ),
}

_ALLOWED_PLACEHOLDERS = {"input", "output", "quality", "subsampling", "chroma"}


@dataclass(frozen=True)
class CorpusEntry:
    image: str
    method: str
    path: str
    file_size: int
    bpp: float

    def to_dict(self) -> dict[str, Any]:
        return {"image": self.image, "method": self.method, "path": self.path,
                "file_size": self.file_size, "bpp": self.bpp}


@dataclass
class CorpusManifest:
    """Inventory of one degraded corpus: inputs, methods, encoded outputs."""

    images: list[ImageRef]
    methods: list[Method]
    entries: list[CorpusEntry] = field(default_factory=list)

    def entry_for(self, image: str, method: str) -> CorpusEntry | None:
        for e in self.entries:
            if e.image == image and e.method == method:
                return e
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "images": [i.to_dict() for i in self.images],
            "methods": [m.to_dict() for m in self.methods],
            "entries": [e.to_dict() for e in sorted(
                self.entries, key=lambda e: (e.image, e.method))],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CorpusManifest":
        return cls(
            images=[ImageRef.from_dict(i) for i in d["images"]],
            methods=[Method.from_dict(m) for m in d["methods"]],
            entries=[CorpusEntry(**e) for e in d["entries"]],
        )

    def to_text(self) -> str:
        lines = ["image,method,path,file_size,bpp"]
        for e in sorted(self.entries, key=lambda e: (e.image, e.method)):
            lines.append(f"{e.image},{e.method},{e.path},{e.file_size},{e.bpp:.6f}")
        return "\n".join(lines) + "\n"


def template_placeholders(template: str) -> set[str]:
    names = set()
    for _, fieldname, _, _ in string.Formatter().parse(template):
        if fieldname is not None:
            names.add(fieldname)
    return names


def validate_templates(templates: dict[str, str]) -> None:
    """Fail before any execution when a template has unknown placeholders."""
    problems = []
    for encoder, template in sorted(templates.items()):
        unknown = template_placeholders(template) - _ALLOWED_PLACEHOLDERS
        if unknown:
            problems.append(
                f"template {encoder!r}: unknown placeholders {sorted(unknown)}"
            )
    if problems:
        raise ConfigError(problems)


def _command_binary(template: str) -> str:
    """The executable a template invokes, skipping env-prefix tokens."""
    tokens = shlex.split(template)
    for tok in tokens:
        if tok == "env" or ("=" in tok and not tok.startswith(("-", "{"))):
            continue
        return tok
    raise ConfigError([f"template has no executable: {template!r}"])


def check_capabilities(templates: dict[str, str]) -> None:
    missing = sorted({
        _command_binary(t) for t in templates.values()
        if shutil.which(_command_binary(t)) is None
    })
    if missing:
        raise CapabilityError(
            f"required encoder binaries not found on PATH: {missing}"
        )


def _render_command(template: str, image: ImageRef, method: Method,
                    output: Path) -> list[str]:
    rendered = template.format(
        input=image.source_path,
        output=str(output),
        quality=method.quality,
        subsampling=_SAMPLING_FACTOR[method.subsampling],
        chroma=_CHROMA_DIGITS[method.subsampling],
    )
    return shlex.split(os.path.expandvars(rendered))


def _run_encode(argv: list[str]) -> None:
    env = None
    while argv and "=" in argv[0] and not argv[0].startswith("-"):
        if env is None:
            env = dict(os.environ)
        key, _, value = argv.pop(0).partition("=")
        env[key] = value
    if argv and argv[0] == "env":
        argv = argv[1:]
        while argv and "=" in argv[0]:
            if env is None:
                env = dict(os.environ)
            key, _, value = argv.pop(0).partition("=")
            env[key] = value
    proc = subprocess.run(argv, capture_output=True, text=True, env=env)
    if proc.returncode != 0:
        raise CommandError(
            f"command {' '.join(argv)!r} exited {proc.returncode}: "
            f"{proc.stderr.strip() or proc.stdout.strip()}",
            returncode=proc.returncode,
            output=proc.stderr + proc.stdout,
        )


def build_corpus(
    images: Sequence[ImageRef],
    methods: Sequence[Method],
    out_dir: str | Path,
    templates: dict[str, str] | None = None,
    parallelism: int = 1,
) -> CorpusManifest:
    """Encode every (image, method) pair, skipping outputs that exist.

    Deterministic given the same inputs and encoder binaries.  Capability
    problems (missing binaries, bad templates) surface before any command
    runs; a failing command attaches its captured output.
    """
    templates = dict(templates or DEFAULT_TEMPLATES)
    validate_templates(templates)
    needed = {m.encoder for m in methods}
    unknown = sorted(needed - set(templates))
    if unknown:
        raise ConfigError([f"no command template for encoder {e!r}" for e in unknown])
    check_capabilities({e: templates[e] for e in needed})

    for img in images:
        if not img.source_path or not Path(img.source_path).exists():
            raise FileNotFoundError(f"source image missing: {img.id!r} "
                                    f"({img.source_path!r})")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    jobs: list[tuple[ImageRef, Method, Path]] = []
    for img in images:
        for method in methods:
            jobs.append((img, method, out / f"{img.id}-{method.id}.jpeg"))

    def encode(job: tuple[ImageRef, Method, Path]) -> CorpusEntry:
        img, method, target = job
        if not (target.exists() and target.stat().st_size > 0):
            _run_encode(_render_command(templates[method.encoder], img, method, target))
        size = target.stat().st_size
        return CorpusEntry(
            image=img.id, method=method.id, path=str(target), file_size=size,
            bpp=bits_per_pixel(size, img.width, img.height),
        )

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            entries = list(pool.map(encode, jobs))
    else:
        entries = [encode(j) for j in jobs]
    return CorpusManifest(images=list(images), methods=list(methods), entries=entries)


def corpus_stats(manifest: CorpusManifest) -> dict[str, float]:
    """Arithmetic mean of per-image bpp for each method.

    The alternative (total bits over total pixels) weights large images
    more; this table intentionally weights images equally.
    """
    missing = [
        (img.id, m.id)
        for img in manifest.images
        for m in manifest.methods
        if manifest.entry_for(img.id, m.id) is None
    ]
    if missing:
        raise IncompleteManifestError(
            f"manifest missing {len(missing)} (image, method) entries: "
            f"{missing[:5]}{'...' if len(missing) > 5 else ''}",
            missing=missing,
        )
    by_method: dict[str, list[float]] = {}
    for e in manifest.entries:
        by_method.setdefault(e.method, []).append(e.bpp)
    return {m: statistics.mean(v) for m, v in sorted(by_method.items())}


def image_ref_from_file(path: str | Path, image_id: str | None = None) -> ImageRef:
    """Build an ImageRef by reading dimensions from the file header."""
    from PIL import Image

    p = Path(path)
    with Image.open(p) as img:
        width, height = img.size
    return ImageRef(id=image_id or p.stem, width=width, height=height,
                    source_path=str(p))
