"""Exception hierarchy; the CLI maps these onto exit codes."""


class DispersimError(Exception):
    pass


class ValidationError(DispersimError, ValueError):
    """Bad user input: scenario, sweep or graph description (exit code 2)."""


class EngineError(DispersimError):
    """A program or controller broke the execution model (exit code 3)."""


class ReplayError(DispersimError):
    """Trace cannot be replayed (unparseable or produced by another engine version)."""
