"""Code-switched sentence generation under a target CMI bucket.

Two generators are provided:

* ``substitute`` — a deterministic lexicon-substitution generator. A seeded
  subset of lexicon-covered words is swapped for their Devanagari Hindi
  forms; the substitution fraction is binary-searched until the measured
  CMI lands in the target bucket (or attempts run out).
* ``generate_via_endpoint`` — sends a fixed Hinglish instruction template to
  a chat-completion endpoint and rejection-samples until the returned text
  measures into the target bucket. Prompted generation alone cannot control
  mixing ratios, so the CMI check is mandatory on this path.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence

from . import cmi as cmi_mod
from .cmi import CmiBreakdown, CmiBucket, bucket_of, compute_cmi
from .errors import EndpointUnavailable, MalformedCompletion, UncoverableSentence, ValidationError
from .langid import tag_utterance, tokenize

# Starting substitution fraction per target bucket (fraction of covered words
# implied by the bucket midpoint); refined by binary search on measured CMI.
_START_FRACTION = {
    CmiBucket.LOW: 0.08,
    CmiBucket.MEDIUM: 0.35,
    CmiBucket.HIGH: 0.5,
}

_BUCKET_RANGE = {
    CmiBucket.LOW: (0.0, cmi_mod.LOW_MEDIUM_BOUNDARY),
    CmiBucket.MEDIUM: (cmi_mod.LOW_MEDIUM_BOUNDARY, cmi_mod.MEDIUM_HIGH_BOUNDARY),
    CmiBucket.HIGH: (cmi_mod.MEDIUM_HIGH_BOUNDARY, cmi_mod.CMI_MAX + 1e-9),
}

PROMPT_TEMPLATE_ASSET = "hinglish_prompt_v1.txt"


@dataclass(frozen=True)
class GenerationSpec:
    target_bucket: CmiBucket
    seed: int = 0
    max_attempts: int = 8
    generator_id: str = "lexicon"  # "lexicon" | "endpoint"
    temperature: float = 0.7
    max_tokens: int = 256

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValidationError("max_attempts must be >= 1")
        if self.generator_id not in ("lexicon", "endpoint"):
            raise ValidationError(f"unknown generator_id {self.generator_id!r}")


@dataclass(frozen=True)
class BilingualLexicon:
    entries: Dict[str, str]

    def __post_init__(self):
        for key, value in self.entries.items():
            if key != key.lower() or any(ch.isspace() for ch in key):
                raise ValidationError(f"lexicon key {key!r} must be lowercase and whitespace-free")
            if not any(0x0900 <= ord(ch) <= 0x097F or 0xA8E0 <= ord(ch) <= 0xA8FF for ch in value):
                raise ValidationError(f"lexicon value {value!r} for {key!r} has no Devanagari letter")

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, word: str) -> Optional[str]:
        return self.entries.get(word.lower())


@dataclass(frozen=True)
class GenerationOutcome:
    text: str
    breakdown: CmiBreakdown
    attempts_used: int
    accepted: bool
    template_hash: Optional[str] = None


class ModelClient(Protocol):
    """Minimal text-generation contract; also used by the eval harness."""

    def generate(self, prompt: str, params: dict) -> List[str]:
        ...


def load_lexicon(path) -> BilingualLexicon:
    """Parse a two-column UTF-8 TSV (english<TAB>hindi); '#' lines are comments."""
    entries: Dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValidationError(f"{path}: line {line_no}: expected 2 tab-separated columns")
        entries[parts[0].strip().lower()] = parts[1].strip()
    return BilingualLexicon(entries=entries)


def bundled_sample_lexicon() -> BilingualLexicon:
    text = resources.files("csforge").joinpath("assets/lexicon_en_hi_sample.tsv").read_text("utf-8")
    entries: Dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        en, hi = line.split("\t")
        entries[en.lower()] = hi
    return BilingualLexicon(entries=entries)


def prompt_template() -> str:
    return resources.files("csforge").joinpath(f"assets/{PROMPT_TEMPLATE_ASSET}").read_text("utf-8")


def prompt_template_hash() -> str:
    return hashlib.sha256(prompt_template().encode("utf-8")).hexdigest()


def _measure(text: str) -> CmiBreakdown:
    return compute_cmi(tag_utterance(text))


def _in_bucket(cmi_percent: float, target: CmiBucket) -> bool:
    return bucket_of(cmi_percent) is target


def _apply_substitutions(sentence: str, tokens, chosen: Sequence[int], lexicon: BilingualLexicon) -> str:
    # Splice replacements in by char span so spacing and punctuation survive verbatim.
    out = []
    cursor = 0
    chosen_set = set(chosen)
    for idx, tok in enumerate(tokens):
        start, end = tok.char_span
        out.append(sentence[cursor:start])
        if idx in chosen_set:
            out.append(lexicon.lookup(tok.text))
        else:
            out.append(sentence[start:end])
        cursor = end
    out.append(sentence[cursor:])
    return "".join(out)


def substitute(sentence: str, lexicon: BilingualLexicon, spec: GenerationSpec) -> GenerationOutcome:
    """Swap a seeded subset of covered words for Hindi, binary-searching the
    substitution fraction until CMI lands in the target bucket."""
    if spec.generator_id != "lexicon":
        raise ValidationError("substitute requires generator_id='lexicon'")
    tokens = tokenize(sentence)
    covered = [i for i, tok in enumerate(tokens) if lexicon.lookup(tok.text) is not None]
    if not covered:
        raise UncoverableSentence(f"lexicon covers no words of {sentence!r}")

    lo_cmi, hi_cmi = _BUCKET_RANGE[spec.target_bucket]
    frac_lo, frac_hi = 0.0, 1.0
    fraction = _START_FRACTION[spec.target_bucket]

    best_text = sentence
    best_breakdown = _measure(sentence)
    attempts = 0
    for attempt in range(spec.max_attempts):
        attempts = attempt + 1
        n_sub = min(len(covered), round(fraction * len(covered)))
        rng = random.Random(f"{spec.seed}:{attempt}")
        chosen = rng.sample(covered, n_sub) if n_sub else []
        candidate = _apply_substitutions(sentence, tokens, chosen, lexicon)
        breakdown = _measure(candidate)
        best_text, best_breakdown = candidate, breakdown
        if _in_bucket(breakdown.cmi_percent, spec.target_bucket):
            return GenerationOutcome(candidate, breakdown, attempts, accepted=True)
        if breakdown.cmi_percent < lo_cmi:
            frac_lo = fraction
        else:
            frac_hi = fraction
        fraction = (frac_lo + frac_hi) / 2.0
    return GenerationOutcome(best_text, best_breakdown, attempts, accepted=False)


def generate_via_endpoint(sentence: str, client: ModelClient, spec: GenerationSpec) -> GenerationOutcome:
    """Prompt the endpoint with the versioned Hinglish template and
    rejection-sample until the output measures into the target bucket."""
    if spec.generator_id != "endpoint":
        raise ValidationError("generate_via_endpoint requires generator_id='endpoint'")
    prompt = prompt_template().replace("{sentence}", sentence)
    tmpl_hash = prompt_template_hash()
    params = {"temperature": spec.temperature, "max_tokens": spec.max_tokens, "n_samples": 1}

    last_text = ""
    last_breakdown = _measure("")
    attempts = 0
    for attempt in range(spec.max_attempts):
        attempts = attempt + 1
        completions = client.generate(prompt, dict(params, seed=spec.seed + attempt))
        if not completions or not completions[0].strip():
            raise MalformedCompletion("endpoint returned an empty completion")
        last_text = completions[0].strip()
        last_breakdown = _measure(last_text)
        if _in_bucket(last_breakdown.cmi_percent, spec.target_bucket):
            return GenerationOutcome(last_text, last_breakdown, attempts, accepted=True, template_hash=tmpl_hash)
    return GenerationOutcome(last_text, last_breakdown, attempts, accepted=False, template_hash=tmpl_hash)


def rejection_filter(candidates: Sequence[str], target: CmiBucket) -> List[GenerationOutcome]:
    """Measure each candidate and mark it accepted iff its bucket matches."""
    outcomes = []
    for text in candidates:
        breakdown = _measure(text)
        accepted = _in_bucket(breakdown.cmi_percent, target)
        outcomes.append(GenerationOutcome(text, breakdown, attempts_used=1, accepted=accepted))
    return outcomes
