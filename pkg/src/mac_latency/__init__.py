"""Round-exact simulation of deterministic broadcast on adversarial multiple access channels."""

from .adversary import AdversaryScript, AdversaryType, make_adversary, validate_script
from .algorithms import ALGORITHMS, Algorithm, make_algorithm
from .channel import ChannelConfig, Feedback, OutboundMessage, Trace, resolve_round, run_simulation
from .errors import BudgetViolation, ConfigError, InvalidInput

__version__ = "0.1.0"
