from enum import Enum


class StepKind(str, Enum):
    """Where a workflow step (or the node hosting it) runs."""

    CLASSICAL = "classical"
    QUANTUM = "quantum"
