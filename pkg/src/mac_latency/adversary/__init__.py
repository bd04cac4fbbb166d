"""Adversary types, budget enforcement and injection/jamming strategies."""

from .budget import (AdversaryScript, AdversaryType, TokenBucket, Violation,
                     format_rational, parse_rational, validate_rates, validate_script)
from .strategies import (STRATEGIES, Adversary, Greedy, JrrwTightness, MbtfTightness,
                         RandomBudgeted, Scripted, Shadow, make_adversary)

__all__ = [
    "AdversaryScript", "AdversaryType", "TokenBucket", "Violation", "format_rational",
    "parse_rational", "validate_rates", "validate_script", "STRATEGIES", "Adversary",
    "Greedy", "JrrwTightness", "MbtfTightness", "RandomBudgeted", "Scripted", "Shadow",
    "make_adversary",
]
