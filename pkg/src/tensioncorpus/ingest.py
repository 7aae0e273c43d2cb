"""Transcript ingestion: paragraph splitting, language detection, artifact
cleanup and speaker attribution.

All functions here are pure; rule sets and lexicons are loaded from data
files and passed in explicitly.
"""

from __future__ import annotations

import datetime
import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from ._resources import load_lines, load_table

CONVENTIONS = ("WHC", "ICHC")
KINDS = ("Ordinary", "Extraordinary")
# first ordinary session year per convention, used to derive session years
_FIRST_SESSION_YEAR = {"WHC": 1977, "ICHC": 2006}
_KIND_CODES = {"Ordinary": "Ord", "Extraordinary": "Ext"}


@dataclass(frozen=True)
class SessionRef:
    convention: str
    number: int
    kind: str
    year: int

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention: {self.convention!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown session kind: {self.kind!r}")
        if self.number < 1:
            raise ValueError("session number must be >= 1")
        current = datetime.date.today().year
        if not 1973 <= self.year <= current:
            raise ValueError(f"session year {self.year} outside [1973, {current}]")

    @property
    def label(self) -> str:
        return f"{self.convention}-{self.number}"

    @property
    def file_stem(self) -> str:
        return f"{self.convention}-{self.number}{_KIND_CODES[self.kind]}"


def session_from_filename(name: str, year: int | None = None) -> SessionRef:
    """Parse `{convention}-{number}{Ord|Ext}.txt` into a SessionRef.

    When no year is given it is derived from the session number, assuming
    annual ordinary sessions starting from each convention's first one.
    """
    m = re.fullmatch(r"(WHC|ICHC)-(\d+)(Ord|Ext)(?:\.txt)?", name)
    if m is None:
        raise ValueError(f"not a session file name: {name!r}")
    convention, number, code = m.group(1), int(m.group(2)), m.group(3)
    kind = "Ordinary" if code == "Ord" else "Extraordinary"
    if year is None:
        year = _FIRST_SESSION_YEAR[convention] + number - 1
        year = min(max(year, 1973), datetime.date.today().year)
    return SessionRef(convention, number, kind, year)


@dataclass(frozen=True)
class Actor:
    kind: str  # Role | StateDelegation | Organisation
    name: str

    def __post_init__(self):
        if self.kind not in ("Role", "StateDelegation", "Organisation"):
            raise ValueError(f"unknown actor kind: {self.kind!r}")
        if not self.name:
            raise ValueError("actor name must be non-empty")


@dataclass(frozen=True)
class ParagraphDraft:
    ordinal: int
    raw_text: str


@dataclass
class Paragraph:
    id: str
    session: SessionRef
    ordinal: int
    raw_text: str
    clean_text: str
    language: str  # En | Fr | Other
    speaker: Actor | None = None
    tension_score: float | None = None
    topic_id: int | None = None

    def __post_init__(self):
        if not self.raw_text:
            raise ValueError("raw_text must be non-empty")
        if self.tension_score is not None and not 0.0 <= self.tension_score <= 1.0:
            raise ValueError("tension_score must lie in [0,1]")


def paragraph_id(session: SessionRef, ordinal: int, raw_text: str) -> str:
    """Stable id: session label + content hash, reproducible on re-ingestion."""
    digest = hashlib.sha256(f"{ordinal}:{raw_text}".encode("utf-8")).hexdigest()
    return f"{session.label}:{digest[:12]}"


# ---------------------------------------------------------------------------
# Paragraph splitting


@dataclass
class SplitProfile:
    """Named rule set for one document era.

    start: lines that always open a new paragraph (speaker lines, bullets).
    sentence_start: after a blank-line run, a matching line opens a paragraph.
    paragraph_end: a blank-run split additionally requires the previous line
    to match, so page breaks falling mid-sentence do not split.
    """

    name: str
    start: list[re.Pattern] = field(default_factory=list)
    sentence_start: list[re.Pattern] = field(default_factory=list)
    paragraph_end: list[re.Pattern] = field(default_factory=list)

    @classmethod
    def from_text(cls, name: str, text: str) -> "SplitProfile":
        profile = cls(name)
        sections = {
            "start": profile.start,
            "sentence-start": profile.sentence_start,
            "paragraph-end": profile.paragraph_end,
        }
        current: list[re.Pattern] | None = None
        for line in text.splitlines():
            line = line.rstrip()
            if not line or line.lstrip().startswith("#"):
                continue
            m = re.fullmatch(r"\[([a-z-]+)\]", line)
            if m:
                if m.group(1) not in sections:
                    raise ValueError(f"unknown profile section [{m.group(1)}]")
                current = sections[m.group(1)]
                continue
            if current is None:
                raise ValueError("pattern before any section header")
            current.append(re.compile(line))
        return profile


@lru_cache(maxsize=None)
def load_profile(name: str) -> SplitProfile:
    """Load a bundled split profile ("modern", "legacy") by name."""
    path = resources.files("tensioncorpus") / "data" / "profiles" / f"{name}.txt"
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValueError(f"unknown split profile: {name!r}") from None
    return SplitProfile.from_text(name, text)


def _matches_any(patterns: list[re.Pattern], line: str) -> bool:
    return any(p.search(line) for p in patterns)


def split_paragraphs(document_text: str, profile: SplitProfile) -> list[ParagraphDraft]:
    """Split a plain-text document into paragraph drafts.

    Boundaries sit at vertical breaks followed by a speaker-line or sentence
    start; blank lines are discarded separators; every non-blank line ends up
    in exactly one draft.
    """
    lines = document_text.split("\n")
    paragraphs: list[list[str]] = []
    current: list[str] = []
    blank_run = False
    for line in lines:
        if not line.strip():
            blank_run = True
            continue
        starts_new = False
        if _matches_any(profile.start, line):
            starts_new = True
        elif blank_run and current:
            prev = current[-1]
            # a speaker/bullet line binds to the text that follows it
            if (
                _matches_any(profile.sentence_start, line)
                and _matches_any(profile.paragraph_end, prev)
                and not _matches_any(profile.start, prev)
            ):
                starts_new = True
        if starts_new and current:
            paragraphs.append(current)
            current = []
        current.append(line)
        blank_run = False
    if current:
        paragraphs.append(current)
    return [
        ParagraphDraft(ordinal=i, raw_text="\n".join(chunk))
        for i, chunk in enumerate(paragraphs)
    ]


# ---------------------------------------------------------------------------
# Language detection

_TRIGRAM_TOP_N = 500
_CONFIDENCE_FLOOR = 0.65


def _trigram_counts(text: str) -> Counter:
    normalized = re.sub(r"[^a-zà-öø-ÿœæ]+", " ", text.lower())
    normalized = f" {normalized.strip()} "
    counts: Counter = Counter()
    for i in range(len(normalized) - 2):
        tri = normalized[i : i + 3]
        if tri.strip():
            counts[tri] += 1
    return counts


def _rank_profile(counts: Counter, top_n: int = _TRIGRAM_TOP_N) -> frozenset:
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    return frozenset(tri for tri, _ in ranked)


def _profile_score(counts: Counter, profile: frozenset) -> float:
    # fraction of the text's trigram occurrences covered by the language's
    # rank-ordered characteristic-trigram profile
    total = sum(counts.values())
    if total == 0:
        return 0.0
    return sum(v for t, v in counts.items() if t in profile) / total


@lru_cache(maxsize=None)
def _language_profiles() -> dict[str, frozenset]:
    root = resources.files("tensioncorpus") / "data" / "langprofiles"
    profiles = {}
    for code, lang in (("en", "En"), ("fr", "Fr")):
        text = (root / f"{code}.txt").read_text(encoding="utf-8")
        profiles[lang] = _rank_profile(_trigram_counts(text))
    return profiles


def detect_language(text: str) -> str:
    """Classify text as "En", "Fr" or "Other" via character-trigram profiles.

    Each language profile is the rank-ordered top trigram set of a bundled
    reference corpus; the score is the fraction of the text's trigrams covered
    by the winning profile. Below the confidence floor the text is "Other";
    digit/punctuation-only text has no alphabetic trigrams and is always
    "Other".
    """
    counts = _trigram_counts(text)
    if not counts:
        return "Other"
    best_lang, best_score = "Other", 0.0
    for lang, profile in _language_profiles().items():
        score = _profile_score(counts, profile)
        if score > best_score:
            best_lang, best_score = lang, score
    return best_lang if best_score >= _CONFIDENCE_FLOOR else "Other"


# ---------------------------------------------------------------------------
# Artifact cleanup

_NO_LETTER_LINE = re.compile(r"^[^A-Za-zÀ-ÖØ-öø-ÿ]*$")
_REPEATED_PUNCT = re.compile(r"([^\w\s])\1{2,}")
_GLYPH_CLUSTER = re.compile(r"(?<!\S)[^\w\s]{2,}(?!\S)")


def clean_artifacts(raw_text: str) -> str:
    """Strip page numbers, rulings and stray glyph runs; never touch words."""
    lines = [ln for ln in raw_text.split("\n") if not _NO_LETTER_LINE.fullmatch(ln)]
    text = " ".join(lines)
    text = _REPEATED_PUNCT.sub(" ", text)
    text = _GLYPH_CLUSTER.sub(" ", text)
    return re.sub(r"\s+", " ", text).strip()


# ---------------------------------------------------------------------------
# Speaker attribution


@dataclass
class ActorLexicon:
    roles: list[str]
    organisations: list[str]
    countries: list[str]
    demonyms: dict[str, str]
    _patterns: list[tuple[re.Pattern, str]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._patterns:
            self._patterns = self._compile()

    def _compile(self) -> list[tuple[re.Pattern, str]]:
        def alt(names):
            return "|".join(
                re.escape(n) for n in sorted(names, key=len, reverse=True)
            )

        article = r"(?:[Tt]he\s+)?"
        patterns = [
            (re.compile(rf"{article}\b({alt(self.roles)})\b"), "role"),
            (re.compile(rf"{article}\b({alt(self.organisations)})\b"), "org"),
            (
                re.compile(
                    rf"{article}[Dd]elegat(?:ion|e)s?\s+(?:of|from)\s+"
                    rf"({alt(self.countries)})\b"
                ),
                "country",
            ),
            (
                re.compile(
                    rf"{article}({alt(self.demonyms)})\s+"
                    r"(?:representative|delegate|delegation)\b"
                ),
                "demonym",
            ),
            # speaker line "Norway:"
            (re.compile(rf"^\s*({alt(self.countries)})\s*:", re.MULTILINE), "country"),
        ]
        return patterns

    def find_earliest(self, text: str) -> Actor | None:
        # (start, -length) ordering: earliest match wins, longer breaks ties
        best: tuple[int, int, Actor] | None = None
        for pattern, kind in self._patterns:
            for m in pattern.finditer(text):
                actor = self._actor_for(kind, m.group(1))
                key = (m.start(), -(m.end() - m.start()))
                if best is None or key < (best[0], best[1]):
                    best = (key[0], key[1], actor)
        return best[2] if best else None

    def _actor_for(self, kind: str, name: str) -> Actor:
        if kind == "role":
            return Actor("Role", name)
        if kind == "org":
            return Actor("Organisation", name)
        if kind == "demonym":
            return Actor("StateDelegation", self.demonyms[name])
        return Actor("StateDelegation", name)


@lru_cache(maxsize=1)
def default_lexicon() -> ActorLexicon:
    return ActorLexicon(
        roles=load_lines("roles.txt"),
        organisations=load_lines("organisations.txt"),
        countries=load_lines("countries.txt"),
        demonyms=load_table("demonyms.txt"),
    )


def extract_speaker(text: str, lexicon: ActorLexicon) -> Actor | None:
    """Return the earliest-starting speaker phrase in the text, if any."""
    return lexicon.find_earliest(text)


def speaker_coverage(paragraphs: list[Paragraph]) -> float:
    """Fraction of paragraphs with an attributed speaker; 0.0 when empty."""
    if not paragraphs:
        return 0.0
    return sum(1 for p in paragraphs if p.speaker is not None) / len(paragraphs)


# ---------------------------------------------------------------------------
# Whole-document ingestion


def ingest_document(
    document_text: str,
    session: SessionRef,
    profile: SplitProfile,
    lexicon: ActorLexicon | None = None,
    keep_other_language: bool = False,
) -> list[Paragraph]:
    """Split, clean, language-tag and speaker-attribute one document.

    Paragraphs detected as neither English nor French are dropped by default;
    they are almost always scan artifacts.
    """
    lexicon = lexicon or default_lexicon()
    paragraphs = []
    for draft in split_paragraphs(document_text, profile):
        clean = clean_artifacts(draft.raw_text)
        language = detect_language(clean)
        if language == "Other" and not keep_other_language:
            continue
        paragraphs.append(
            Paragraph(
                id=paragraph_id(session, draft.ordinal, draft.raw_text),
                session=session,
                ordinal=draft.ordinal,
                raw_text=draft.raw_text,
                clean_text=clean,
                language=language,
                speaker=extract_speaker(draft.raw_text, lexicon),
            )
        )
    return paragraphs
