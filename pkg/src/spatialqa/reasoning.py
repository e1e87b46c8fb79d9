"""Answering and scoring benchmark items.

Two answerers share this module's contracts: the rule-based oracle
(``rule_answer``) and an external chat model, for which ``build_llm_prompt``
renders the structured prompt and ``extract_answer`` maps free text (possibly
with a reasoning trace) back onto the allowed answers.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Sequence

from .benchmark import BOOLEAN, MCQ, NO, YES, Category, QAItem, answer_query, item_keys
from .errors import ValidationError
from .motion import SignConvention, Tolerances
from .tracks import SceneMetadata, tracks_to_prompt

SYSTEM_PROMPT_VERSION = "v1"
EXTRACTION_RULES = (
    "reasoning blocks removed; boolean = last standalone yes/no; "
    "mcq = last choice text or letter tag such as (B), B) or 'Answer: B'"
)


class CannotAnswer(Exception):
    """The oracle does not recognize the item or cannot ground it in the scene."""


class _Unparseable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNPARSEABLE"

    def __bool__(self):
        return False


UNPARSEABLE = _Unparseable()


@dataclass
class AnswerRecord:
    clip_id: str
    index: int
    raw_response: str
    extracted_answer: str | None  # None when unparseable
    latency_s: float = 0.0
    answered_by: str = "oracle"  # or "llm"
    note: str | None = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.clip_id, self.index)

    @property
    def unparseable(self) -> bool:
        return not self.extracted_answer

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> AnswerRecord:
        d = json.loads(line)
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def rule_answer(scene: SceneMetadata, item: QAItem, tol: Tolerances = Tolerances()) -> str:
    if item.query is None:
        raise CannotAnswer(f"unrecognized question: {item.prompt!r}")
    if item.clip_id != scene.clip_id:
        raise CannotAnswer(f"item belongs to clip {item.clip_id}, scene is {scene.clip_id}")
    try:
        return answer_query(scene, item.query, tol)
    except (LookupError, ValidationError) as exc:
        raise CannotAnswer(str(exc)) from None


def _load_system_template() -> str:
    return resources.files("spatialqa").joinpath(f"assets/system_prompt_{SYSTEM_PROMPT_VERSION}.txt").read_text("utf-8")


def _letters(n: int) -> str:
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZ"[:n]


def build_llm_prompt(scene: SceneMetadata, item: QAItem, tol: Tolerances = Tolerances()) -> tuple[str, str]:
    if tol.convention is SignConvention.LEFT_POSITIVE:
        sign = "Positive values are to the listener's left and negative values to the right."
        regions = ("front-left is +45 to +90 degrees, slightly left +15 to +45, front -15 to +15, "
                   "slightly right -45 to -15, front-right -90 to -45.")
    else:
        sign = "Positive values are to the listener's right and negative values to the left."
        regions = ("front-left is -90 to -45 degrees, slightly left -45 to -15, front -15 to +15, "
                   "slightly right +15 to +45, front-right +45 to +90.")
    if item.qtype == MCQ:
        rule = "Answer with exactly one of the listed choices, copied verbatim."
    else:
        rule = "Answer Yes or No."
    system = _load_system_template().format(
        sign_sentence=sign,
        region_sentence=regions,
        doa_tol=f"{tol.doa_deg:g}",
        dist_tol=f"{tol.dist_m:g}",
        format_rule=rule,
    )
    user = f"Spatial attributes:\n{tracks_to_prompt(scene)}\n\nQuestion: {item.prompt}"
    if item.qtype == MCQ:
        user += "\nChoices: " + " ".join(f"({L}) {c}" for L, c in zip(_letters(len(item.choices)), item.choices))
    return system, user


def strip_reasoning(raw: str, markers: tuple[str, str] = ("<think>", "</think>")) -> str:
    open_m, close_m = markers
    text = re.sub(re.escape(open_m) + r".*?" + re.escape(close_m), " ", raw, flags=re.S)
    if close_m in text:
        # opening tag omitted by the server: everything before the close is reasoning
        text = text.rsplit(close_m, 1)[1]
    if open_m in text:
        # unterminated trace
        text = text.split(open_m, 1)[0]
    return text


def _choice_pattern(choice: str) -> re.Pattern:
    words = re.findall(r"\w+", choice)
    if not words:
        return re.compile(re.escape(choice), re.I)
    return re.compile(r"(?<!\w)" + r"[\W_]+".join(re.escape(w) for w in words) + r"(?!\w)", re.I)


def _last_match(text: str, item: QAItem) -> str | None:
    best_pos, best = -1, None
    if item.qtype == BOOLEAN:
        for m in re.finditer(r"(?<![\w-])(yes|no)(?![\w-])", text, re.I):
            best_pos, best = m.start(), YES if m.group(1).lower() == "yes" else NO
        return best
    choices = item.choices or ()
    for choice in choices:
        for m in _choice_pattern(choice).finditer(text):
            # prefer the longer choice when two end at the same place
            if m.end() > best_pos or (m.end() == best_pos and best is not None and len(choice) > len(best)):
                best_pos, best = m.end(), choice
    letters = _letters(len(choices))
    tag = re.compile(r"\(([A-Z])\)|(?<![\w])([A-Z])\)|[Aa]nswer\s*(?:is)?\s*[:：]?\s*([A-Z])(?![\w])")
    for m in tag.finditer(text):
        letter = m.group(1) or m.group(2) or m.group(3)
        if letter in letters and m.end() > best_pos:
            best_pos, best = m.end(), choices[letters.index(letter)]
    return best


def extract_answer(raw: str, item: QAItem, markers: tuple[str, str] = ("<think>", "</think>")):
    """Return the canonical answer string or ``UNPARSEABLE``."""
    found = _last_match(strip_reasoning(raw or "", markers), item)
    return UNPARSEABLE if found is None else found


def normalize(text: str) -> str:
    return " ".join(text.casefold().split()).rstrip(".!")


def is_correct(item: QAItem, answer: str | None) -> bool:
    if not answer:
        return False
    given = normalize(answer)
    if item.qtype == MCQ and item.choices and given not in {normalize(c) for c in item.choices}:
        m = re.fullmatch(r"\(?([a-z])\)?", given)
        if m and ord(m.group(1)) - ord("a") < len(item.choices):
            given = normalize(item.choices[ord(m.group(1)) - ord("a")])
    return given == normalize(item.answer)


@dataclass
class Tally:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.total if self.total else None

    @property
    def fraction(self) -> Fraction | None:
        return Fraction(self.correct, self.total) if self.total else None


def _pct(t: Tally) -> str:
    return "n/a" if t.total == 0 else f"{100.0 * t.correct / t.total:.1f}%"


@dataclass
class EvalReport:
    per_category: dict[str, Tally]
    per_type: dict[str, Tally]
    overall: Tally
    unparseable_count: int = 0
    missing_count: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def overall_accuracy(self) -> float | None:
        return self.overall.accuracy

    def to_dict(self) -> dict:
        return {
            "per_category_accuracy": {k: v.accuracy for k, v in self.per_category.items()},
            "per_type_accuracy": {k: v.accuracy for k, v in self.per_type.items()},
            "overall_accuracy": self.overall.accuracy,
            "counts": {
                "per_category": {k: [v.correct, v.total] for k, v in self.per_category.items()},
                "per_type": {k: [v.correct, v.total] for k, v in self.per_type.items()},
                "overall": [self.overall.correct, self.overall.total],
            },
            "unparseable_count": self.unparseable_count,
            "missing_count": self.missing_count,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def table(self, model: str = "model") -> str:
        cols = [c.value for c in Category] + ["Overall"]
        cells = [_pct(self.per_category[c]) for c in cols[:-1]] + [_pct(self.overall)]
        type_cols = [MCQ, BOOLEAN]
        type_cells = [_pct(self.per_type[t]) for t in type_cols]
        lines = []
        for header, row in ((["Model"] + cols, [model] + cells), (["Model"] + type_cols, [model] + type_cells)):
            widths = [max(len(h), len(c)) for h, c in zip(header, row)]
            lines.append(" | ".join(h.ljust(w) for h, w in zip(header, widths)))
            lines.append(" | ".join(c.ljust(w) for c, w in zip(row, widths)))
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"


def score(items: Sequence[QAItem], answers: Sequence[AnswerRecord]) -> EvalReport:
    if not items:
        raise ValidationError("nothing to score")
    keys = item_keys(items)
    by_key = {a.key: a for a in answers}
    stray = set(by_key) - set(keys)
    if stray:
        raise ValidationError(f"{len(stray)} answer(s) do not match any item, e.g. {sorted(stray)[0]}")

    per_category = {c.value: Tally() for c in Category}
    per_type = {MCQ: Tally(), BOOLEAN: Tally()}
    overall = Tally()
    unparseable = missing = 0
    for key, item in zip(keys, items):
        rec = by_key.get(key)
        if rec is None:
            missing += 1
            ok = False
        else:
            if rec.unparseable:
                unparseable += 1
            ok = is_correct(item, rec.extracted_answer)
        cells = [per_type[item.qtype], overall]
        cat = item.category.value if item.category else "Unrecognized"
        cells.append(per_category.setdefault(cat, Tally()))
        for cell in cells:
            cell.total += 1
            cell.correct += ok
    return EvalReport(
        per_category=per_category,
        per_type=per_type,
        overall=overall,
        unparseable_count=unparseable,
        missing_count=missing,
        metadata={"answer_extraction": EXTRACTION_RULES, "system_prompt": SYSTEM_PROMPT_VERSION},
    )
