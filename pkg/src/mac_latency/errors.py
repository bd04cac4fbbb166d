"""Exception types shared across the package."""


class ConfigError(ValueError):
    """An invalid configuration, or an algorithm used on a channel it cannot run on."""


class InvalidInput(ValueError):
    """Malformed round input, e.g. a station transmitting twice in one round."""


class BudgetViolation(Exception):
    """An adversary exceeded its injection or jamming budget.

    ``window`` is the inclusive round interval ``(start, end)`` whose count
    exceeds ``rate * length + b``; ``kind`` is ``"inject"`` or ``"jam"``.
    """

    def __init__(self, window, kind, count=None, budget=None):
        self.window = window
        self.kind = kind
        self.count = count
        self.budget = budget
        start, end = window
        msg = f"{kind} budget exceeded in rounds [{start}, {end}]"
        if count is not None:
            msg += f": {count} > {budget}"
        super().__init__(msg)
