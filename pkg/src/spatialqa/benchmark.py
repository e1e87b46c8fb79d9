"""Template-driven motion QA generation and the benchmark JSON format.

Every answer is computed by the rules in :mod:`spatialqa.motion`. The JSON
schema carries only ``clip_id, type, prompt, choices, answer, scoring``; the
question's category and slots are recovered from the prompt by matching it
against the template set, so a parsed benchmark can be re-answered and scored
per category without side files.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import motion
from .errors import SchemaError, ValidationError
from .motion import CrossAspect, DoABucket, Tolerances
from .tracks import SceneMetadata, track_names, validate_scene


class Category(enum.Enum):
    DOA_TRAJECTORY = "DoA"
    DISTANCE_DYNAMICS = "DistDyn"
    CROSS_SOURCE = "CrossSrc"
    DIST_VS_DOA = "Dist vs DoA"


ALL_CATEGORIES = tuple(Category)
MCQ, BOOLEAN = "mcq-single", "boolean"
CHOICE_MATCH, EXACT = "choice_match", "exact"
YES, NO = "Yes", "No"

DISTANCE_CHOICES = tuple(t.value for t in motion.DistanceTrend)
DOMINANT_CHOICES = tuple(d.value for d in motion.DominantChange)

REGIONS: dict[str, frozenset[DoABucket]] = {
    "left side": motion.LEFT_SIDE,
    "right side": motion.RIGHT_SIDE,
    "front": motion.FRONT,
    "front-left": frozenset({DoABucket.FRONT_LEFT}),
    "slightly left": frozenset({DoABucket.SLIGHTLY_LEFT}),
    "slightly right": frozenset({DoABucket.SLIGHTLY_RIGHT}),
    "front-right": frozenset({DoABucket.FRONT_RIGHT}),
}
COARSE_REGIONS = ("left side", "front", "right side")

TEMPLATES: dict[str, tuple[str, ...]] = {
    "trajectory": (
        "Did the {a} move noticeably from the {src} toward the {dst} over the course of the clip?",
        "Over the clip, did the {a} travel from the {src} to the {dst}?",
        "Is it true that the {a} started at the {src} and ended up at the {dst}, with a noticeable change in direction?",
    ),
    "distance_trend": (
        "By the end of the {a} activity, was the source closer, farther, or about the same distance compared to the start?",
        "Compared with when it started, did the {a} end up closer to the listener, farther away, or at about the same distance?",
        "How did the distance between the listener and the {a} change from the start to the end of its activity?",
    ),
    "cross_mcq_closest_approach": (
        "Which audio source came closest to the listener during the clip?",
        "Which sound source reached the smallest distance from the listener at any point in the clip?",
    ),
    "cross_mcq_largest_direction_shift": (
        "Which audio source changed its direction the most over the clip?",
        "Which sound source showed the largest left/right shift in direction during the clip?",
    ),
    "cross_mcq_largest_distance_change": (
        "Which audio source changed its distance to the listener the most over the clip?",
        "Which sound source moved the most toward or away from the listener during the clip?",
    ),
    "cross_bool_closest_approach": (
        "Did the {a} come closer to the listener at some point than the {b} ever did?",
    ),
    "cross_bool_largest_direction_shift": (
        "Did the {a} change its direction more than the {b} did (i.e., show a larger left/right shift)?",
    ),
    "cross_bool_largest_distance_change": (
        "Did the {a} change its distance to the listener more than the {b} did?",
    ),
    "dominant": (
        "Which aspect changed more over the clip for the {a}: the direction it came from or its distance to the listener?",
        "For the {a}, did its direction or its distance to the listener change more during the clip?",
        "Considering each attribute's full range, which changed more for the {a}: direction of arrival or source distance?",
    ),
}

KIND_CATEGORY = {
    "trajectory": Category.DOA_TRAJECTORY,
    "distance_trend": Category.DISTANCE_DYNAMICS,
    "dominant": Category.DIST_VS_DOA,
}
for _aspect in CrossAspect:
    KIND_CATEGORY[f"cross_mcq_{_aspect.value}"] = Category.CROSS_SOURCE
    KIND_CATEGORY[f"cross_bool_{_aspect.value}"] = Category.CROSS_SOURCE


@dataclass(frozen=True)
class Query:
    """Machine-readable question descriptor: template family, variant, slot values."""

    kind: str
    template: int
    slots: tuple[tuple[str, str], ...] = ()

    def slot(self, name: str) -> str:
        return dict(self.slots)[name]

    def render(self) -> str:
        return TEMPLATES[self.kind][self.template].format(**dict(self.slots))


@dataclass(frozen=True)
class QAItem:
    clip_id: str
    qtype: str
    prompt: str
    answer: str
    scoring: str
    choices: tuple[str, ...] | None = None
    category: Category | None = None
    query: Query | None = None

    def __post_init__(self):
        if self.choices is not None:
            object.__setattr__(self, "choices", tuple(self.choices))
        problems = item_problems(self)
        if problems:
            raise SchemaError("; ".join(problems))


@dataclass(frozen=True)
class SkipRecord:
    clip_id: str
    category: Category
    reason: str


def item_problems(item: QAItem) -> list[str]:
    out = []
    if not item.clip_id:
        out.append("empty clip_id")
    if not item.prompt:
        out.append("empty prompt")
    if item.qtype == MCQ:
        if item.choices is None or len(item.choices) < 2:
            out.append("mcq-single needs at least 2 choices")
        elif item.answer not in item.choices:
            out.append(f"answer {item.answer!r} is not one of the choices")
        if item.scoring not in (CHOICE_MATCH, EXACT):
            out.append(f"unknown scoring {item.scoring!r}")
    elif item.qtype == BOOLEAN:
        if item.answer not in (YES, NO):
            out.append(f"boolean answer must be Yes or No, got {item.answer!r}")
        if item.scoring != EXACT:
            out.append("boolean items must use exact scoring")
        if item.choices is not None:
            out.append("boolean items carry no choices")
    else:
        out.append(f"unknown type {item.qtype!r}")
    return out


def _slot_pattern(name: str) -> str:
    if name in ("src", "dst"):
        alts = "|".join(re.escape(r) for r in sorted(REGIONS, key=len, reverse=True))
        return f"(?P<{name}>{alts})"
    return f"(?P<{name}>.+?)"


def _compile(template: str) -> re.Pattern:
    parts = re.split(r"\{(\w+)\}", template)
    regex = "".join(re.escape(p) if i % 2 == 0 else _slot_pattern(p) for i, p in enumerate(parts))
    return re.compile(regex)


_COMPILED = [
    (kind, idx, _compile(t)) for kind, variants in TEMPLATES.items() for idx, t in enumerate(variants)
]


def recognize(prompt: str) -> Query | None:
    """Recover the descriptor of a templated prompt; None if foreign or ambiguous."""
    found = set()
    for kind, idx, pattern in _COMPILED:
        m = pattern.fullmatch(prompt)
        if m:
            found.add(Query(kind, idx, tuple(sorted(m.groupdict().items()))))
    return found.pop() if len(found) == 1 else None


def _rng(clip_id: str, seed: int, category: Category) -> random.Random:
    digest = hashlib.sha256(f"{seed}\x00{clip_id}\x00{category.name}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "little"))


def _region_of(bucket: DoABucket) -> str:
    return next(name for name in COARSE_REGIONS if bucket in REGIONS[name])


def answer_query(scene: SceneMetadata, query: Query, tol: Tolerances = Tolerances()) -> str:
    """Compute the answer of a descriptor on ``scene``.

    Raises LookupError when the descriptor names a source absent from the scene.
    """
    names = track_names(scene)

    def track(slot):
        name = query.slot(slot)
        if name not in names:
            raise LookupError(f"no source named {name!r} in clip {scene.clip_id}")
        return scene.tracks[names.index(name)]

    kind = query.kind
    if kind == "trajectory":
        ok = motion.trajectory_matches(
            track("a"), tol, REGIONS[query.slot("src")], REGIONS[query.slot("dst")]
        )
        return YES if ok else NO
    if kind == "distance_trend":
        return motion.distance_dynamics(track("a"), tol).value
    if kind == "dominant":
        return motion.dominant_change(track("a"), tol).value
    if kind.startswith("cross_mcq_"):
        aspect = CrossAspect(kind[len("cross_mcq_"):])
        return motion.cross_source_compare(scene, aspect, tol)[0]
    if kind.startswith("cross_bool_"):
        aspect = CrossAspect(kind[len("cross_bool_"):])
        a, b = query.slot("a"), query.slot("b")
        track("a"), track("b")
        values = motion.cross_source_values(scene, aspect, tol)
        if aspect is CrossAspect.CLOSEST_APPROACH:
            return YES if values[a] < values[b] else NO
        return YES if values[a] > values[b] else NO
    raise LookupError(f"unknown query kind {kind!r}")


def _make_item(scene, query: Query, tol, choices=None) -> QAItem:
    answer = answer_query(scene, query, tol)
    qtype = MCQ if choices is not None else BOOLEAN
    return QAItem(
        clip_id=scene.clip_id,
        qtype=qtype,
        prompt=query.render(),
        answer=answer,
        scoring=CHOICE_MATCH if qtype == MCQ else EXACT,
        choices=choices,
        category=KIND_CATEGORY[query.kind],
        query=query,
    )


def _trajectory_query(scene, rng, tol) -> Query:
    names = track_names(scene)
    i = rng.randrange(len(names))
    s = motion.summarize_motion(scene.tracks[i], tol)
    truthful = None
    start, end = _region_of(s.start_bucket), _region_of(s.end_bucket)
    if start != end:
        truthful = (start, end)
    elif s.start_bucket != s.end_bucket:
        truthful = (s.start_bucket.value, s.end_bucket.value)
    decoys = [(p, q) for p in COARSE_REGIONS for q in COARSE_REGIONS if p != q and (p, q) != truthful]
    if truthful is not None and rng.random() < 0.5:
        src, dst = truthful
    else:
        src, dst = rng.choice(decoys)
    template = rng.randrange(len(TEMPLATES["trajectory"]))
    return Query("trajectory", template, tuple(sorted({"a": names[i], "src": src, "dst": dst}.items())))


def _single_track_query(kind: str, scene, rng) -> Query:
    names = track_names(scene)
    i = rng.randrange(len(names))
    template = rng.randrange(len(TEMPLATES[kind]))
    return Query(kind, template, (("a", names[i]),))


def _cross_query(scene, rng) -> tuple[Query, tuple[str, ...] | None]:
    names = track_names(scene)
    aspect = rng.choice(list(CrossAspect))
    if rng.random() < 0.5:
        kind = f"cross_mcq_{aspect.value}"
        return Query(kind, rng.randrange(len(TEMPLATES[kind]))), tuple(names)
    kind = f"cross_bool_{aspect.value}"
    a, b = rng.sample(names, 2)
    return Query(kind, rng.randrange(len(TEMPLATES[kind])), (("a", a), ("b", b))), None


def generate_qa(scene: SceneMetadata, categories: Iterable[Category] = ALL_CATEGORIES,
                tol: Tolerances = Tolerances(), seed: int = 0,
                per_category: int = 1) -> tuple[list[QAItem], list[SkipRecord]]:
    """Generate questions for one scene; returns ``(items, skipped)``.

    Categories are visited in the fixed ``Category`` order so the output is a
    pure function of the scene, the category set, the tolerances and the seed.
    """
    diags = validate_scene(scene)
    if diags:
        raise ValidationError(f"{scene.clip_id}: " + "; ".join(diags))
    wanted = set(categories)
    items: list[QAItem] = []
    skipped: list[SkipRecord] = []
    n_tracks = len(scene.tracks)
    for cat in ALL_CATEGORIES:
        if cat not in wanted:
            continue
        need = 2 if cat is Category.CROSS_SOURCE else 1
        if n_tracks < need:
            skipped.append(SkipRecord(scene.clip_id, cat, f"needs ≥ {need} tracks"))
            continue
        rng = _rng(scene.clip_id, seed, cat)
        emitted = set()
        for _ in range(per_category * 4):
            if len(emitted) == per_category:
                break
            if cat is Category.DOA_TRAJECTORY:
                q, choices = _trajectory_query(scene, rng, tol), None
            elif cat is Category.DISTANCE_DYNAMICS:
                q, choices = _single_track_query("distance_trend", scene, rng), DISTANCE_CHOICES
            elif cat is Category.DIST_VS_DOA:
                q, choices = _single_track_query("dominant", scene, rng), DOMINANT_CHOICES
            else:
                q, choices = _cross_query(scene, rng)
            if q in emitted or recognize(q.render()) != q:
                continue  # duplicate, or prompt would not parse back unambiguously
            emitted.add(q)
            items.append(_make_item(scene, q, tol, choices))
        if not emitted:
            skipped.append(SkipRecord(scene.clip_id, cat, "no unambiguous question could be phrased"))
    return items, skipped


FIELD_ORDER = ("clip_id", "type", "prompt", "choices", "answer", "scoring")


def item_to_dict(item: QAItem) -> dict:
    out = {"clip_id": item.clip_id, "type": item.qtype, "prompt": item.prompt}
    if item.choices is not None:
        out["choices"] = list(item.choices)
    out["answer"] = item.answer
    out["scoring"] = item.scoring
    return out


def serialize_benchmark(items: Sequence[QAItem]) -> str:
    for i, item in enumerate(items):
        problems = item_problems(item)
        if problems:
            raise SchemaError("; ".join(problems), index=i)
    return json.dumps([item_to_dict(it) for it in items], ensure_ascii=False, indent=2)


def parse_benchmark(text: str) -> list[QAItem]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from None
    if not isinstance(data, list):
        raise SchemaError("benchmark must be a JSON array")
    items = []
    for i, el in enumerate(data):
        if not isinstance(el, dict):
            raise SchemaError("element is not an object", index=i)
        extra = set(el) - set(FIELD_ORDER)
        if extra:
            raise SchemaError(f"unknown key(s) {sorted(extra)}", index=i)
        missing = {"clip_id", "type", "prompt", "answer", "scoring"} - set(el)
        if missing:
            raise SchemaError(f"missing key(s) {sorted(missing)}", index=i)
        for key in ("clip_id", "type", "prompt", "answer", "scoring"):
            if not isinstance(el[key], str):
                raise SchemaError(f"{key} must be a string", index=i)
        choices = el.get("choices")
        if choices is not None and not (isinstance(choices, list) and all(isinstance(c, str) for c in choices)):
            raise SchemaError("choices must be an array of strings", index=i)
        query = recognize(el["prompt"])
        try:
            items.append(QAItem(
                clip_id=el["clip_id"],
                qtype=el["type"],
                prompt=el["prompt"],
                answer=el["answer"],
                scoring=el["scoring"],
                choices=tuple(choices) if choices is not None else None,
                category=KIND_CATEGORY[query.kind] if query else None,
                query=query,
            ))
        except SchemaError as exc:
            raise SchemaError(str(exc), index=i) from None
    return items


def item_keys(items: Sequence[QAItem]) -> list[tuple[str, int]]:
    """``(clip_id, per-clip index)`` keys, in benchmark order."""
    seen: dict[str, int] = {}
    keys = []
    for it in items:
        idx = seen.get(it.clip_id, 0)
        keys.append((it.clip_id, idx))
        seen[it.clip_id] = idx + 1
    return keys
