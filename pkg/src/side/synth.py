"""Synthetic severity series and document corpora for pipeline testing.

Severity is a seasonal sinusoid plus AR(1) noise clamped to the DSCI
range.  Documents are drawn per week with a rate that rises with
severity, and each document's determinant is sampled from a mixture
that shifts toward Agriculture / Water Utilities / Wildfire Management
as conditions worsen.  Social documents reflect severity ``social_lead``
weeks ahead (social discourse leads the physical signal), news
documents reflect the current week.

Everything is driven by one seeded generator, so output files are
reproducible byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .core import DSCI_MAX, DSCI_MIN
from .dsiq import DETERMINANT_NAMES, OTHER_INDEX, load_lexicon

#: In-state location entities embedded in generated texts (and written to
#: entities.txt).  Multi-word entries exercise token-boundary matching.
IN_STATE_PLACES = (
    "fresno",
    "bakersfield",
    "riverbend",
    "lakeport",
    "mercer valley",
    "dustin county",
    "palo verde",
    "sierra flats",
)

#: Out-of-state places; documents mentioning only these must be geofiltered out.
OUT_OF_STATE_PLACES = ("reno", "phoenix", "tulsa")

FILLERS = (
    "officials",
    "residents",
    "week",
    "local",
    "amid",
    "continues",
    "latest",
    "county",
    "community",
    "ongoing",
    "concerns",
    "impacts",
)

#: Neutral vocabulary for documents sampled under the "Other" determinant.
OTHER_TERMS = (
    "announcement",
    "meeting",
    "update",
    "statement",
    "review",
    "report",
    "notice",
    "schedule",
    "forum",
    "broadcast",
    "newsletter",
    "bulletin",
)


@dataclass(frozen=True)
class SynthSpec:
    weeks: int = 330
    base_severity: float = 220.0
    seasonal_amplitude: float = 120.0
    seasonal_period: float = 52.0
    noise_scale: float = 18.0
    ar_coeff: float = 0.85
    social_lead: int = 4
    docs_per_week: float = 10.0
    out_of_state_fraction: float = 0.1
    start: date = date(2017, 1, 2)

    def __post_init__(self):
        if self.weeks < 1:
            raise ValueError("weeks must be >= 1")
        if self.social_lead < 0:
            raise ValueError("social_lead must be >= 0")
        if self.docs_per_week < 0:
            raise ValueError("docs_per_week must be >= 0")
        if not 0.0 <= self.out_of_state_fraction < 1.0:
            raise ValueError("out_of_state_fraction must be in [0, 1)")


def generate_severity(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(spec.weeks)
    seasonal = spec.base_severity + spec.seasonal_amplitude * np.sin(
        2.0 * np.pi * t / spec.seasonal_period
    )
    noise = np.zeros(spec.weeks)
    for i in range(spec.weeks):
        prev = noise[i - 1] if i else 0.0
        noise[i] = spec.ar_coeff * prev + spec.noise_scale * rng.standard_normal()
    return np.clip(seasonal + noise, DSCI_MIN, DSCI_MAX)


def determinant_mixture(severity_value: float) -> np.ndarray:
    """Determinant sampling weights as a function of severity.

    High-severity weeks tilt hard toward Agriculture, Water Utilities
    and Wildfire Management while recreation chatter dries up, giving
    the impact channel a strong, learnable coupling to severity.
    """
    s = float(severity_value) / DSCI_MAX
    weights = np.array(
        [
            0.25 + 2.2 * s,  # Agriculture
            0.35 + 0.4 * s,  # Ecosystems
            0.18 + 0.5 * s,  # Energy
            0.14 + 0.7 * s,  # Hazard Planning & Preparedness
            0.12,  # Manufacturing
            0.10,  # Navigation and Transportation
            0.22 + 0.6 * s,  # Public Health
            max(0.55 - 0.45 * s, 0.08),  # Recreation and Tourism
            0.30 + 2.6 * s,  # Water Utilities
            0.08 + 1.4 * s * s,  # Wildfire Management
            0.25,  # Other
        ]
    )
    return weights / weights.sum()


def _make_text(det_index: int, lexicon: dict, rng: np.random.Generator, out_of_state: bool) -> str:
    name = DETERMINANT_NAMES[det_index]
    pool = OTHER_TERMS if det_index == OTHER_INDEX else tuple(lexicon[name])
    topic_words = list(rng.choice(pool, size=min(3, len(pool)), replace=False))
    fillers = list(rng.choice(FILLERS, size=2, replace=False))
    places = OUT_OF_STATE_PLACES if out_of_state else IN_STATE_PLACES
    place = places[rng.integers(len(places))]
    return f"{fillers[0]} {topic_words[0]} {' '.join(topic_words[1:])} in {place} {fillers[1]}"


def generate_documents(
    spec: SynthSpec, severity: np.ndarray, source: str, rng: np.random.Generator
) -> list[dict]:
    """Weekly document dicts (id, timestamp, text) for one source."""
    lexicon = load_lexicon()
    lead = spec.social_lead if source == "social" else 0
    docs = []
    for t in range(spec.weeks):
        driver = severity[min(t + lead, spec.weeks - 1)]
        s = driver / DSCI_MAX
        lam = spec.docs_per_week * (0.35 + 1.3 * s)
        count = int(rng.poisson(lam))
        mixture = determinant_mixture(driver)
        week_start = spec.start + timedelta(days=7 * t)
        for i in range(count):
            det = int(rng.choice(len(mixture), p=mixture))
            out_of_state = rng.random() < spec.out_of_state_fraction
            stamp = datetime.combine(
                week_start + timedelta(days=int(rng.integers(7))),
                datetime.min.time(),
                tzinfo=timezone.utc,
            ) + timedelta(hours=int(rng.integers(24)), minutes=int(rng.integers(60)))
            docs.append(
                {
                    "id": f"{source}-{t:04d}-{i:03d}",
                    "timestamp": stamp.isoformat().replace("+00:00", "Z"),
                    "text": _make_text(det, lexicon, rng, out_of_state),
                }
            )
    return docs


def write_dataset(out_dir, spec: SynthSpec, seed: int) -> dict[str, Path]:
    """Generate and write dsci.csv, posts.jsonl, news.jsonl, entities.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    severity = generate_severity(spec, rng)
    social = generate_documents(spec, severity, "social", rng)
    news = generate_documents(spec, severity, "news", rng)

    paths = {
        "dsci": out / "dsci.csv",
        "social": out / "posts.jsonl",
        "news": out / "news.jsonl",
        "entities": out / "entities.txt",
    }
    with open(paths["dsci"], "w", encoding="utf-8", newline="") as fh:
        fh.write("week_start,dsci\n")
        for t, value in enumerate(severity):
            day = spec.start + timedelta(days=7 * t)
            fh.write(f"{day.isoformat()},{float(value)!r}\n")
    for key, docs in (("social", social), ("news", news)):
        with open(paths[key], "w", encoding="utf-8", newline="") as fh:
            for doc in docs:
                fh.write(json.dumps(doc, sort_keys=True) + "\n")
    with open(paths["entities"], "w", encoding="utf-8", newline="") as fh:
        fh.write("# synthetic in-state location entities\n")
        for place in IN_STATE_PLACES:
            fh.write(place + "\n")
    return paths
