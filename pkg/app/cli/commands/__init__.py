from . import ablation, adapt, attention, evaluate, generate, train

COMMANDS = [generate, train, adapt, evaluate, ablation, attention]

__all__ = ["COMMANDS"]
