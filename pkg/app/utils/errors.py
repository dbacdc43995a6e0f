"""
Exception hierarchy for the grid threat toolkit.

Every error carries a human readable ``detail`` and the process ``exit_code``
the CLI should return when it escapes to the top level:
- 2: input or validation problems (bad case file, bad flags, unsolvable input)
- 1: usage problems (raised by argparse itself)
"""

from typing import Optional


class GridThreatError(Exception):
    """Base error with a detail message and a CLI exit code."""

    exit_code: int = 2

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self) -> str:
        return self.detail


class CaseFormatError(GridThreatError):
    """A case-file record could not be parsed."""

    def __init__(self, line_number: int, section: str, message: str):
        self.line_number = line_number
        self.section = section
        super().__init__(f"line {line_number} ({section}): {message}")


class CaseValidationError(GridThreatError):
    """A structurally parsed case violates a grid invariant."""


class PowerImbalanceError(GridThreatError):
    """Generation and load do not balance."""


class SingularSystemError(GridThreatError):
    """The reduced susceptance matrix cannot be factorized."""


class IslandingContingencyError(GridThreatError):
    """An outage that splits the network was requested."""

    def __init__(self, line_id: int):
        self.line_id = line_id
        super().__init__(f"outage of line {line_id} islands the network")


class UnobservableError(GridThreatError):
    """Taken measurements do not determine every state."""

    def __init__(self, deficiency: int):
        self.deficiency = deficiency
        super().__init__(
            f"system is unobservable: measurement Jacobian is rank deficient by {deficiency}"
        )


class ScopfInfeasibleError(GridThreatError):
    """No dispatch satisfies the security constraints."""

    def __init__(self, hint: str):
        self.hint = hint
        super().__init__(f"no secure dispatch exists ({hint})")


class DispatchLimitError(GridThreatError):
    """A dispatch is neither zero nor within the generator rating."""


class LoadOutOfBoundsError(GridThreatError):
    """A bus load lies outside its rated bounds."""


class GoalImpossibleError(GridThreatError):
    """The overload goal cannot be met by counting alone."""


class InconsistentLimitsError(GridThreatError):
    """Attacker limits contradict the goal."""


class AttackInvariantError(GridThreatError):
    """An attack vector violates one of its structural invariants."""


class UnknownFixtureError(GridThreatError):
    """A bundled fixture name was not recognized."""
