"""Corpus data model, on-disk formats, and synthetic corpus generation.

A corpus bundles a class table with a list of videos. Each video carries a
framewise feature matrix, its weak annotation (the unordered set of action
classes occurring somewhere in the video), and optionally framewise ground
truth labels. Ground truth is never used for weakly supervised training;
it feeds evaluation and the optional fully supervised training mode.

On-disk layout of a corpus directory:

    classes.txt            one class name per line, line index = class id;
                           a line may end in ` #background`
    actionsets.txt         lines `<video_id>: <name> <name> ...`
    features/<id>.feat     text (`T d` header + T rows of d reals) or
                           binary (magic SSFEAT1, u32 T, u32 d, T*d f32 LE)
    groundtruth/<id>.txt   optional, T lines of class names
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorpusError

FEAT_MAGIC = b"SSFEAT1"
BACKGROUND_MARK = "#background"
BACKGROUND_NAME = "background"


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassTable:
    """Stable name/id mapping over all action classes plus background."""

    names: tuple[str, ...]
    background_id: int

    def __post_init__(self):
        if not self.names:
            raise CorpusError("class table is empty")
        if len(set(self.names)) != len(self.names):
            raise CorpusError("class names are not unique")
        if any(not n for n in self.names):
            raise CorpusError("class names must be non-empty")
        if not 0 <= self.background_id < len(self.names):
            raise CorpusError(f"background id {self.background_id} out of range")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    def __len__(self):
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise CorpusError(f"unknown class name {name!r}") from None

    def name_of(self, class_id: int) -> str:
        return self.names[class_id]


@dataclass
class VideoRecord:
    """One video: frame features, weak action-set label, optional ground truth."""

    id: str
    features: np.ndarray          # (T, d) float32
    action_set: frozenset[int]
    gt_labels: np.ndarray | None = None   # (T,) int32

    @property
    def num_frames(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def validate(self, table: ClassTable) -> None:
        if self.features.ndim != 2 or self.num_frames < 1 or self.feature_dim < 1:
            raise CorpusError(f"video {self.id}: features must be a T x d matrix with T,d >= 1")
        if not self.action_set:
            raise CorpusError(f"video {self.id}: empty action set")
        if any(not 0 <= c < len(table) for c in self.action_set):
            raise CorpusError(f"video {self.id}: action set references unknown class id")
        if self.gt_labels is not None:
            if len(self.gt_labels) != self.num_frames:
                raise CorpusError(
                    f"video {self.id}: {len(self.gt_labels)} ground-truth labels"
                    f" for {self.num_frames} frames"
                )
            if self.gt_labels.min() < 0 or self.gt_labels.max() >= len(table):
                raise CorpusError(f"video {self.id}: ground-truth label out of range")


@dataclass(frozen=True)
class Segmentation:
    """Alternating (class_id, length) segments covering a video exactly."""

    segments: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.segments:
            raise CorpusError("segmentation has no segments")
        if any(l < 1 for _, l in self.segments):
            raise CorpusError("segment lengths must be >= 1")

    @property
    def total_frames(self) -> int:
        return sum(l for _, l in self.segments)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(c for c, _ in self.segments)


@dataclass
class Corpus:
    class_table: ClassTable
    videos: list[VideoRecord]
    split_tag: str = "train"

    def validate(self) -> None:
        if not self.videos:
            raise CorpusError("corpus has no videos")
        dims = {v.feature_dim for v in self.videos}
        if len(dims) > 1:
            raise CorpusError(f"inconsistent feature dimensions across videos: {sorted(dims)}")
        seen = set()
        for v in self.videos:
            if v.id in seen:
                raise CorpusError(f"duplicate video id {v.id!r}")
            seen.add(v.id)
            v.validate(self.class_table)

    @property
    def feature_dim(self) -> int:
        return self.videos[0].feature_dim

    def video_by_id(self, video_id: str) -> VideoRecord:
        for v in self.videos:
            if v.id == video_id:
                return v
        raise CorpusError(f"no video with id {video_id!r}")


def segmentation_to_framewise(seg: Segmentation) -> np.ndarray:
    """Expand a segmentation into one class id per frame."""
    out = np.empty(seg.total_frames, dtype=np.int32)
    t = 0
    for c, l in seg.segments:
        out[t:t + l] = c
        t += l
    return out


def framewise_to_segmentation(labels) -> Segmentation:
    """Collapse framewise labels into maximal same-class runs."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise CorpusError("cannot segment an empty label sequence")
    segments = []
    start = 0
    for t in range(1, len(labels) + 1):
        if t == len(labels) or labels[t] != labels[start]:
            segments.append((int(labels[start]), t - start))
            start = t
    return Segmentation(tuple(segments))


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def load_classes(path) -> ClassTable:
    path = Path(path)
    names = []
    background = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                raise CorpusError(f"{path}:{lineno}: empty class line")
            name = line
            if line.rstrip().endswith(BACKGROUND_MARK):
                name = line[: line.rfind(BACKGROUND_MARK)].rstrip()
                if background is not None:
                    raise CorpusError(f"{path}:{lineno}: multiple background marks")
                background = len(names)
            name = name.strip()
            names.append(name)
    if background is None:
        background = names.index(BACKGROUND_NAME) if BACKGROUND_NAME in names else 0
    return ClassTable(tuple(names), background)


def save_classes(table: ClassTable, path) -> None:
    path = Path(path)
    lines = []
    for i, name in enumerate(table.names):
        lines.append(f"{name} {BACKGROUND_MARK}" if i == table.background_id else name)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_features(path) -> np.ndarray:
    """Read a `.feat` file, text or binary, into a (T, d) float32 matrix."""
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(FEAT_MAGIC):
        header = raw[len(FEAT_MAGIC):len(FEAT_MAGIC) + 8]
        if len(header) < 8:
            raise CorpusError(f"{path}: truncated binary feature header")
        t, d = struct.unpack("<II", header)
        body = raw[len(FEAT_MAGIC) + 8:]
        if len(body) != 4 * t * d:
            raise CorpusError(f"{path}: expected {4 * t * d} payload bytes, got {len(body)}")
        return np.frombuffer(body, dtype="<f4").reshape(t, d).astype(np.float32)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise CorpusError(f"{path}: neither a binary nor a text feature file") from None
    lines = text.splitlines()
    if not lines:
        raise CorpusError(f"{path}:1: empty feature file")
    head = lines[0].split()
    if len(head) != 2:
        raise CorpusError(f"{path}:1: header must be 'T d'")
    try:
        t, d = int(head[0]), int(head[1])
    except ValueError:
        raise CorpusError(f"{path}:1: non-integer header") from None
    if t < 1 or d < 1:
        raise CorpusError(f"{path}:1: T and d must be >= 1")
    rows = np.empty((t, d), dtype=np.float32)
    for r in range(t):
        if r + 1 >= len(lines):
            raise CorpusError(f"{path}:{r + 2}: expected {t} feature rows, file ends early")
        parts = lines[r + 1].split()
        if len(parts) != d:
            raise CorpusError(f"{path}:{r + 2}: expected {d} values, got {len(parts)}")
        try:
            rows[r] = [float(p) for p in parts]
        except ValueError:
            raise CorpusError(f"{path}:{r + 2}: non-numeric feature value") from None
    return rows


def save_features(features: np.ndarray, path, binary: bool = True) -> None:
    path = Path(path)
    features = np.asarray(features, dtype=np.float32)
    t, d = features.shape
    if binary:
        with path.open("wb") as fh:
            fh.write(FEAT_MAGIC)
            fh.write(struct.pack("<II", t, d))
            fh.write(features.astype("<f4").tobytes())
    else:
        with path.open("w", encoding="utf-8") as fh:
            fh.write(f"{t} {d}\n")
            for row in features:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def _load_groundtruth(path, table: ClassTable) -> np.ndarray:
    path = Path(path)
    labels = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            name = raw.strip()
            if not name:
                continue
            try:
                labels.append(table.id_of(name))
            except CorpusError:
                raise CorpusError(f"{path}:{lineno}: unknown class name {name!r}") from None
    return np.asarray(labels, dtype=np.int32)


def load_corpus(features_dir, annotations_file, classes_file,
                groundtruth_dir=None, split_tag: str = "train") -> Corpus:
    """Load and validate a corpus.

    The background class is added to every video's action set: background is
    modeled as an ordinary class, and including it uniformly makes it learnable
    in every video while carrying no ordering information.
    """
    features_dir = Path(features_dir)
    annotations_file = Path(annotations_file)
    table = load_classes(classes_file)
    videos = []
    with annotations_file.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise CorpusError(f"{annotations_file}:{lineno}: expected '<id>: <names...>'")
            vid, _, names = line.partition(":")
            vid = vid.strip()
            tokens = names.split()
            if not vid:
                raise CorpusError(f"{annotations_file}:{lineno}: missing video id")
            if not tokens:
                raise CorpusError(f"{annotations_file}:{lineno}: no actions listed for {vid!r}")
            try:
                action_set = frozenset(table.id_of(tok) for tok in tokens)
            except CorpusError as exc:
                raise CorpusError(f"{annotations_file}:{lineno}: {exc}") from None
            action_set = action_set | {table.background_id}
            feat_path = features_dir / f"{vid}.feat"
            if not feat_path.exists():
                raise CorpusError(f"{annotations_file}:{lineno}: no feature file {feat_path}")
            features = load_features(feat_path)
            gt = None
            if groundtruth_dir is not None:
                gt_path = Path(groundtruth_dir) / f"{vid}.txt"
                if gt_path.exists():
                    gt = _load_groundtruth(gt_path, table)
            videos.append(VideoRecord(vid, features, action_set, gt))
    corpus = Corpus(table, videos, split_tag)
    corpus.validate()
    return corpus


def load_corpus_dir(corpus_dir, split_tag: str = "train") -> Corpus:
    """Load a corpus laid out under a single directory (see module docstring)."""
    corpus_dir = Path(corpus_dir)
    gt_dir = corpus_dir / "groundtruth"
    return load_corpus(
        corpus_dir / "features",
        corpus_dir / "actionsets.txt",
        corpus_dir / "classes.txt",
        groundtruth_dir=gt_dir if gt_dir.is_dir() else None,
        split_tag=split_tag,
    )


def save_corpus(corpus: Corpus, out_dir, binary_features: bool = True) -> None:
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    save_classes(corpus.class_table, out_dir / "classes.txt")
    lines = []
    for v in corpus.videos:
        names = " ".join(corpus.class_table.name_of(c) for c in sorted(v.action_set))
        lines.append(f"{v.id}: {names}")
        save_features(v.features, out_dir / "features" / f"{v.id}.feat", binary=binary_features)
    (out_dir / "actionsets.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if any(v.gt_labels is not None for v in corpus.videos):
        gt_dir = out_dir / "groundtruth"
        gt_dir.mkdir(exist_ok=True)
        for v in corpus.videos:
            if v.gt_labels is None:
                continue
            text = "\n".join(corpus.class_table.name_of(int(c)) for c in v.gt_labels)
            (gt_dir / f"{v.id}.txt").write_text(text + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# synthetic corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic segmentation corpus.

    Videos are built by sampling an ordering from `orderings`, drawing each
    segment length from a Poisson with the class's true mean (clamped to >= 1),
    and emitting per-frame features = class prototype + isotropic Gaussian
    noise. Prototypes are placed at pairwise distance >= `separation`.
    """

    class_names: tuple[str, ...]
    feature_dim: int
    separation: float
    noise_sigma: float
    true_means: tuple[float, ...]
    n_train: int
    n_test: int
    orderings: tuple[tuple[int, ...], ...]
    background_id: int = 0

    def validate(self) -> None:
        c = len(self.class_names)
        if c < 1:
            raise ConfigError("need at least one class")
        if len(set(self.class_names)) != c:
            raise ConfigError("class names must be unique")
        if len(self.true_means) != c:
            raise ConfigError(f"{len(self.true_means)} means for {c} classes")
        if any(m <= 0 for m in self.true_means):
            raise ConfigError("true mean lengths must be positive")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.separation < 0:
            raise ConfigError("separation must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.n_train < 1:
            raise ConfigError("need at least one training video")
        if self.n_test < 0:
            raise ConfigError("n_test must be >= 0")
        if not self.orderings:
            raise ConfigError("need at least one admissible ordering")
        for o in self.orderings:
            if not o:
                raise ConfigError("orderings must be non-empty")
            if any(not 0 <= cid < c for cid in o):
                raise ConfigError(f"ordering {o} references unknown class id")
        if not 0 <= self.background_id < c:
            raise ConfigError("background_id out of range")


def random_orderings(num_classes: int, background_id: int, count: int, rng,
                     min_actions: int = 2, max_actions: int | None = None,
                     wrap_background: bool = True) -> tuple[tuple[int, ...], ...]:
    """Draw `count` distinct random action orderings.

    Each ordering is a permutation of a random subset of the non-background
    classes, optionally wrapped in background segments. Subset sizes vary so
    that classes appear in different co-occurrence contexts.
    """
    actions = [c for c in range(num_classes) if c != background_id]
    if not actions:
        raise ConfigError("need at least one non-background class")
    max_actions = min(max_actions or len(actions), len(actions))
    min_actions = min(min_actions, max_actions)
    seen = set()
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * count:
            raise ConfigError("could not generate enough distinct orderings")
        size = int(rng.integers(min_actions, max_actions + 1))
        subset = rng.permutation(actions)[:size]
        ordering = [int(c) for c in subset]
        if wrap_background:
            ordering = [background_id] + ordering + [background_id]
        key = tuple(ordering)
        if key in seen:
            continue
        seen.add(key)
        out.append(key)
    return tuple(out)


def _prototypes(config: SynthConfig, rng) -> np.ndarray:
    c, d = len(config.class_names), config.feature_dim
    protos = rng.standard_normal((c, d))
    if c < 2 or config.separation == 0:
        return protos
    for _ in range(100):
        diffs = protos[:, None, :] - protos[None, :, :]
        dist = np.sqrt((diffs ** 2).sum(-1))
        np.fill_diagonal(dist, np.inf)
        dmin = dist.min()
        if dmin > 0:
            return protos * (config.separation / dmin)
        protos = rng.standard_normal((c, d))
    raise ConfigError("failed to place distinct class prototypes")


def generate_synthetic(config: SynthConfig, seed: int):
    """Generate (train, test, hidden_truth) deterministically from `seed`.

    `hidden_truth` maps video id to the true Segmentation for every video of
    both splits. Action sets are the exact set of classes appearing in the
    video, so they include background only where an ordering contains it.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    table = ClassTable(config.class_names, config.background_id)
    protos = _prototypes(config, rng)
    hidden_truth: dict[str, Segmentation] = {}

    def make_split(tag: str, count: int) -> Corpus:
        videos = []
        for k in range(count):
            ordering = config.orderings[int(rng.integers(len(config.orderings)))]
            lengths = [max(1, int(rng.poisson(config.true_means[c]))) for c in ordering]
            seg = Segmentation(tuple(zip(ordering, lengths)))
            frames = []
            for c, l in seg.segments:
                noise = config.noise_sigma * rng.standard_normal((l, config.feature_dim))
                frames.append(protos[c] + noise)
            features = np.concatenate(frames, axis=0).astype(np.float32)
            vid = f"{tag}_{k:04d}"
            hidden_truth[vid] = seg
            videos.append(VideoRecord(
                id=vid,
                features=features,
                action_set=frozenset(ordering),
                gt_labels=segmentation_to_framewise(seg),
            ))
        corpus = Corpus(table, videos, tag)
        corpus.validate()
        return corpus

    train = make_split("train", config.n_train)
    test = make_split("test", config.n_test) if config.n_test else Corpus(table, [], "test")
    return train, test, hidden_truth
