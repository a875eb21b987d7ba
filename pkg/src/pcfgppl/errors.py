"""Exception hierarchy shared by the compiler stages and the runtime."""

from __future__ import annotations


class CompileError(Exception):
    """A program was rejected by one of the compiler stages."""

    def __init__(self, message: str, stage: str = "compile", loc: tuple[int, int] | None = None):
        self.stage = stage
        self.loc = loc
        self.message = message
        where = f"{loc[0]}:{loc[1]}: " if loc else ""
        super().__init__(f"{stage}: {where}{message}")


class ParseError(CompileError):
    def __init__(self, message: str, loc: tuple[int, int] | None = None):
        super().__init__(message, "parse", loc)


class TypeCheckError(CompileError):
    def __init__(self, message: str, loc: tuple[int, int] | None = None):
        super().__init__(message, "typecheck", loc)


class DistParamError(ValueError):
    """Distribution parameters outside their domain."""


class VMError(RuntimeError):
    pass


class StackOverflow(VMError):
    pass


class InvalidBlock(VMError):
    pass


class NaNWeight(VMError):
    pass


class TapeExhausted(VMError):
    """A forced-choice tape ran out of values."""


class InferenceError(RuntimeError):
    """Raised by the SMC engine; carries the index of the failing particle if known."""

    def __init__(self, message: str, particle: int | None = None):
        self.particle = particle
        prefix = f"particle {particle}: " if particle is not None else ""
        super().__init__(prefix + message)


class AllParticlesRejected(InferenceError):
    pass
