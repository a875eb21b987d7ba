"""Compiled PCFGs and the single-particle block executor.

A :class:`BlockProgram` is a list of basic blocks, each a list of
:class:`Instr`. Block 0 is the entry; :data:`STOP` is the terminal
sentinel. A particle's state is a flat cell stack plus a stack pointer,
its accumulated log-weight, the next block to run and its RNG.

Blocks are executed by translating each instruction list once into a Python
function (see :func:`build_executor`); :func:`sim` then runs a block,
follows direct jumps and returns at the first checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Union

from . import dists, prims
from .errors import InvalidBlock, NaNWeight, StackOverflow, VMError

STOP = -1

JUMP, HALT, YIELD = 0, 1, 2


# ------------------------------------------------------------------ instructions


@dataclass(frozen=True)
class Lit:
    value: Any

    def __str__(self):
        return repr(self.value)


Operand = Union[str, Lit]  # a local name or a literal


def _o(x) -> str:
    return str(x)


@dataclass(frozen=True)
class Instr:
    def __str__(self):
        return type(self).__name__


@dataclass(frozen=True)
class Move(Instr):
    dst: str
    src: Operand

    def __str__(self):
        return f"{self.dst} = {_o(self.src)}"


@dataclass(frozen=True)
class Prim(Instr):
    dst: str
    op: str
    args: tuple

    def __str__(self):
        return f"{self.dst} = {self.op}({', '.join(map(_o, self.args))})"


@dataclass(frozen=True)
class LoadConst(Instr):
    dst: str
    name: str

    def __str__(self):
        return f"{self.dst} = const[{self.name}]"


@dataclass(frozen=True)
class MakeTuple(Instr):
    dst: str
    items: tuple

    def __str__(self):
        return f"{self.dst} = ({', '.join(map(_o, self.items))})"


@dataclass(frozen=True)
class MakeVariant(Instr):
    dst: str
    con: str
    arg: Operand

    def __str__(self):
        return f"{self.dst} = {self.con}({_o(self.arg)})"


@dataclass(frozen=True)
class Proj(Instr):
    dst: str
    src: Operand
    index: int

    def __str__(self):
        return f"{self.dst} = {_o(self.src)}.{self.index}"


@dataclass(frozen=True)
class TestCon(Instr):
    dst: str
    src: Operand
    con: str

    def __str__(self):
        return f"{self.dst} = {_o(self.src)} is {self.con}"


@dataclass(frozen=True)
class LoadFrame(Instr):
    """``dst = frame[offset : offset + width]`` in the current frame."""

    dst: str
    offset: int
    ty: Any
    width: int = 1

    def __str__(self):
        return f"{self.dst} = sf[{self.offset}]" + (f"/{self.width}" if self.width != 1 else "")


@dataclass(frozen=True)
class StoreFrame(Instr):
    offset: int
    src: Operand
    ty: Any
    width: int = 1

    def __str__(self):
        return f"sf[{self.offset}] = {_o(self.src)}" + (f"/{self.width}" if self.width != 1 else "")


@dataclass(frozen=True)
class FrameAddr(Instr):
    """``dst`` = stack-relative address of a slot of the current frame."""

    dst: str
    offset: int

    def __str__(self):
        return f"{self.dst} = &sf[{self.offset}]"


@dataclass(frozen=True)
class Reserve(Instr):
    """Make room for a frame of ``size`` cells above the stack pointer."""

    size: int

    def __str__(self):
        return f"reserve {self.size}"


@dataclass(frozen=True)
class StoreCallee(Instr):
    offset: int
    src: Operand
    ty: Any
    width: int = 1

    def __str__(self):
        return f"callsf[{self.offset}] = {_o(self.src)}" + (
            f"/{self.width}" if self.width != 1 else "")


@dataclass(frozen=True)
class PushFrame(Instr):
    size: int

    def __str__(self):
        return f"sp += {self.size}"


@dataclass(frozen=True)
class PopFrame(Instr):
    size: int

    def __str__(self):
        return f"sp -= {self.size}"


@dataclass(frozen=True)
class WriteRel(Instr):
    """``stack[base + addr ...] = src`` for a stack-relative address."""

    addr: Operand
    src: Operand
    ty: Any
    width: int = 1

    def __str__(self):
        return f"*(stack + {_o(self.addr)}) = {_o(self.src)}" + (
            f"/{self.width}" if self.width != 1 else "")


@dataclass(frozen=True)
class Sample(Instr):
    dst: str
    dist: str
    args: tuple

    def __str__(self):
        return f"{self.dst} = sample {self.dist}({', '.join(map(_o, self.args))})"


@dataclass(frozen=True)
class Score(Instr):
    dist: str
    args: tuple
    value: Operand

    def __str__(self):
        return f"score {self.dist}({', '.join(map(_o, self.args))}) at {_o(self.value)}"


@dataclass(frozen=True)
class AddLogWeight(Instr):
    src: Operand

    def __str__(self):
        return f"logweight += {_o(self.src)}"


@dataclass(frozen=True)
class CallDirect(Instr):
    dst: str
    fn: str
    args: tuple

    def __str__(self):
        return f"{self.dst} = {self.fn}({', '.join(map(_o, self.args))})"


@dataclass(frozen=True)
class Branch(Instr):
    cond: Operand
    thn: tuple
    els: tuple


@dataclass(frozen=True)
class SetNext(Instr):
    target: Union[int, str]

    def __str__(self):
        return f"next = {_target(self.target)}"


@dataclass(frozen=True)
class JumpDirect(Instr):
    target: Union[int, str]

    def __str__(self):
        return f"jump {_target(self.target)}"


@dataclass(frozen=True)
class HaltCheckpoint(Instr):
    def __str__(self):
        return "checkpoint"


def _target(t) -> str:
    if t == STOP:
        return "stop"
    return str(t)


def format_instrs(instrs, indent: int = 1) -> list[str]:
    pad = "  " * indent
    out = []
    for ins in instrs:
        if isinstance(ins, Branch):
            out.append(f"{pad}if {_o(ins.cond)}:")
            out += format_instrs(ins.thn, indent + 1) or [f"{pad}  pass"]
            if ins.els:
                out.append(f"{pad}else:")
                out += format_instrs(ins.els, indent + 1)
        else:
            out.append(f"{pad}{ins}")
    return out


# ------------------------------------------------------------------ program


@dataclass
class BlockInfo:
    function: str
    local_index: int
    frame_size: int


@dataclass
class BlockProgram:
    blocks: list  # of tuple[Instr, ...]
    info: list  # of BlockInfo
    entry: int
    stop: int
    layouts: dict  # function -> FrameLayout
    consts: dict  # name -> (type, value)
    variants: dict
    function_entries: dict  # decomposed function -> global entry block
    return_targets: dict  # decomposed function -> set of possible return blocks
    direct_source: str  # Python source of the resample-free functions
    direct_functions: tuple
    result_type: Any
    result_width: int
    main_frame_size: int
    _fns: Any = field(default=None, repr=False, compare=False)

    @property
    def fns(self):
        if self._fns is None:
            self._fns = build_executor(self)
        return self._fns

    def __getstate__(self):
        d = dict(self.__dict__)
        d["_fns"] = None
        return d

    def validate(self) -> None:
        """Check jump targets and that STOP is reachable from every block."""
        n = len(self.blocks)
        if not 0 <= self.entry < n:
            raise InvalidBlock(f"entry block {self.entry} out of range")
        succ: list = [set() for _ in range(n)]
        for k, instrs in enumerate(self.blocks):
            if not _tail_only_ok(instrs):
                raise InvalidBlock(f"block {k}: control transfer not in tail position")
            for t in _targets(instrs):
                if isinstance(t, int):
                    if t != STOP and not 0 <= t < n:
                        raise InvalidBlock(f"block {k}: target {t} out of range")
                    succ[k].add(t)
                else:
                    fn = self.info[k].function
                    succ[k] |= self.return_targets.get(fn, {STOP})
        # blocks that can reach STOP
        pred: dict = {}
        for k, ss in enumerate(succ):
            for t in ss:
                pred.setdefault(t, set()).add(k)
        ok, work = set(), [STOP]
        while work:
            t = work.pop()
            for p in pred.get(t, ()):
                if p not in ok:
                    ok.add(p)
                    work.append(p)
        bad = [k for k in range(n) if k not in ok]
        if bad:
            raise InvalidBlock(f"stop is unreachable from blocks {bad}")

    def dump(self) -> str:
        lines = []
        for k, instrs in enumerate(self.blocks):
            bi = self.info[k]
            lines.append(f"block {k}  ({bi.function} #{bi.local_index}, frame {bi.frame_size}):")
            lines += format_instrs(instrs)
        if self.direct_functions:
            lines.append("direct: " + ", ".join(self.direct_functions))
        return "\n".join(lines)


@dataclass(frozen=True)
class DumpedBlock:
    """One block as read back from :meth:`BlockProgram.dump`."""

    function: str
    local_index: int
    frame_size: int
    lines: tuple  # (depth, text) per instruction line
    targets: tuple  # jump and next targets, ints or local names


def parse_dump(text: str) -> tuple[list, tuple]:
    """Inverse of :meth:`BlockProgram.dump` down to instruction text:
    ``(blocks, direct function names)``."""
    blocks, direct, cur = [], (), None
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("block "):
            head, _, rest = line.partition("  (")
            k = int(head.split()[1])
            if k != len(blocks):
                raise ValueError(f"block {k} out of order")
            fn, _, info = rest.rstrip("):").rpartition(" #")
            idx, _, frame = info.partition(", frame ")
            cur = (fn, int(idx), int(frame), [], [])
            blocks.append(cur)
        elif line.startswith("direct: "):
            direct = tuple(x.strip() for x in line[len("direct: "):].split(","))
        elif cur is not None and line.startswith("  "):
            depth = (len(line) - len(line.lstrip(" "))) // 2 - 1
            body = line.strip()
            cur[3].append((depth, body))
            for kw in ("jump ", "next = "):
                if body.startswith(kw):
                    t = body[len(kw):]
                    cur[4].append(STOP if t == "stop" else int(t) if t.lstrip("-").isdigit() else t)
        else:
            raise ValueError(f"unexpected line {line!r}")
    return [DumpedBlock(f, i, fs, tuple(ls), tuple(ts)) for f, i, fs, ls, ts in blocks], direct


def _ends_in_transfer(lines, i, depth) -> tuple[bool, int]:
    """Does the instruction run at ``depth`` starting at ``lines[i]`` end in a
    jump or checkpoint on every path? Returns (ok, index after the run)."""
    last_ok = False
    while i < len(lines) and lines[i][0] >= depth:
        d, text = lines[i]
        if d > depth:
            return False, i
        if text.startswith("if ") and text.endswith(":"):
            thn, i = _ends_in_transfer(lines, i + 1, depth + 1)
            els = False
            if i < len(lines) and lines[i] == (depth, "else:"):
                els, i = _ends_in_transfer(lines, i + 1, depth + 1)
            last_ok = thn and els
            continue
        last_ok = text.startswith("jump ") or text == "checkpoint"
        i += 1
    return last_ok, i


def validate_dump(blocks: list) -> bool:
    """Every block ends each path in a transfer and every literal target exists."""
    n = len(blocks)
    for b in blocks:
        ok, end = _ends_in_transfer(list(b.lines), 0, 0)
        if not ok or end != len(b.lines) or b.frame_size < 0:
            return False
        for t in b.targets:
            if isinstance(t, int) and t != STOP and not 0 <= t < n:
                return False
    return True


def _targets(instrs):
    for ins in instrs:
        if isinstance(ins, (SetNext, JumpDirect)):
            yield ins.target
        elif isinstance(ins, Branch):
            yield from _targets(ins.thn)
            yield from _targets(ins.els)
        elif isinstance(ins, CallDirect):
            pass


def _tail_only_ok(instrs) -> bool:
    for i, ins in enumerate(instrs):
        last = i == len(instrs) - 1
        if isinstance(ins, (JumpDirect, HaltCheckpoint)) and not last:
            return False
        if isinstance(ins, Branch) and not (_tail_only_ok(ins.thn) and _tail_only_ok(ins.els)):
            return False
    return True


# ------------------------------------------------------------------ particle state


class ParticleState:
    __slots__ = ("stack", "sp", "logw", "next", "rng", "cap")

    def __init__(self, stack, sp, logw, next, rng, cap=4096):
        self.stack = stack
        self.sp = sp
        self.logw = logw
        self.next = next
        self.rng = rng
        self.cap = cap

    def __getstate__(self):
        return (self.stack, self.sp, self.logw, self.next, self.rng, self.cap)

    def __setstate__(self, st):
        self.stack, self.sp, self.logw, self.next, self.rng, self.cap = st

    def __repr__(self):
        return (f"ParticleState(sp={self.sp}, logw={self.logw}, next={self.next}, "
                f"stack={self.stack[:self.sp]!r})")


class CopyStats:
    """Instrumentation for :func:`copy_state`."""

    __slots__ = ("copies", "cells")

    def __init__(self):
        self.copies = 0
        self.cells = 0


def copy_state(s: ParticleState, rng=None, stats: CopyStats | None = None) -> ParticleState:
    """Copy a particle; only the live prefix ``stack[:sp]`` is copied."""
    sp = s.sp
    if stats is not None:
        stats.copies += 1
        stats.cells += sp
    return ParticleState(s.stack[:sp], sp, s.logw, s.next,
                         s.rng.copy() if rng is None else rng, s.cap)


def initial_state(prog: BlockProgram, rng, capacity: int = 4096) -> ParticleState:
    """Empty stack with the result area at the base and main's frame above it."""
    w = prog.result_width
    lay = prog.layouts[prog.info[prog.entry].function]
    size = w + lay.size
    if size > capacity:
        raise StackOverflow(f"main frame needs {size} cells, capacity is {capacity}")
    stack = [0] * size
    stack[w + lay.ra] = STOP
    stack[w + lay.ret_val_loc] = 0
    return ParticleState(stack, size, 0.0, prog.entry, rng, capacity)


def result_value(prog: BlockProgram, s: ParticleState):
    from .frames import unflatten

    w = prog.result_width
    return unflatten(prog.result_type, s.stack[:w], prog.variants)


# ------------------------------------------------------------------ execution


def sim(prog: BlockProgram, b: int, s: ParticleState, trace: list | None = None):
    """Run block ``b`` (and any blocks it jumps to) on ``s``.

    Returns ``(next, s, checkpoint)``; ``sim(STOP, s)`` is ``(STOP, s, True)``.
    """
    fns = prog.fns
    n = len(fns)
    try:
        while True:
            if b == STOP:
                s.next = STOP
                return STOP, s, True
            if b.__class__ is not int or not 0 <= b < n:
                raise InvalidBlock(f"invalid block index {b!r}")
            b, kind = fns[b](s)
            lw = s.logw
            if lw != lw:
                raise NaNWeight("log-weight became NaN")
            if trace is not None:
                trace.append((b, kind))
            if kind:
                s.next = b
                return b, s, kind == HALT
    except RecursionError:
        raise StackOverflow("recursion too deep in a resample-free function") from None


def run_single(prog: BlockProgram, s: ParticleState) -> ParticleState:
    """Run to termination, treating checkpoints as no-ops."""
    b = s.next
    while b != STOP:
        b, s, _ = sim(prog, b, s)
    return s


def walk_frames(prog: BlockProgram, s: ParticleState) -> list:
    """Debug check of the frame chain of a paused particle.

    Every stored return-value location must be a stack-relative address
    inside the live stack. Returns the list of frame base addresses.
    """
    if s.next == STOP:
        if s.sp != prog.result_width:
            raise VMError(f"terminated particle has sp={s.sp}, expected {prog.result_width}")
        return []
    fn = prog.info[s.next].function
    bases = []
    top = s.sp
    while True:
        lay = prog.layouts[fn]
        fb = top - lay.size
        if fb < prog.result_width:
            raise VMError(f"frame of {fn} below the result area")
        rvl = s.stack[fb + lay.ret_val_loc]
        if not isinstance(rvl, int) or not 0 <= rvl < fb + lay.size:
            raise VMError(f"frame of {fn}: return-value location {rvl!r} is not a live "
                          "stack-relative address")
        bases.append(fb)
        ra = s.stack[fb + lay.ra]
        if ra == STOP:
            if fb != prog.result_width:
                raise VMError("main frame is not at the bottom of the stack")
            return bases
        if not isinstance(ra, int) or not 0 <= ra < len(prog.blocks):
            raise VMError(f"frame of {fn}: bad return address {ra!r}")
        fn = prog.info[ra].function
        top = fb


# ------------------------------------------------------------------ translator


def mangle(name: str) -> str:
    """Injective map from source/ANF names to Python identifiers."""
    out = ["v_"]
    for ch in name:
        if ch.isascii() and ch.isalnum():
            out.append(ch)
        elif ch == "_":
            out.append("__")
        else:
            out.append(f"_{ord(ch):x}_")
    return "".join(out)


class _Namespace:
    def __init__(self, prog):
        from .frames import flatten, unflatten

        self.prog = prog
        self.env: dict = {
            "StackOverflow": StackOverflow,
            "VMError": VMError,
            "STOP": STOP,
        }
        for name, fn in prims.PRIM_FUNCS.items():
            self.env[f"P_{name}"] = fn
        for name, fn in dists.LOGPDFS.items():
            self.env[f"LP_{name}"] = fn
        self.const_names: dict = {}
        for i, (name, (_, value)) in enumerate(prog.consts.items()):
            key = f"K{i}"
            self.env[key] = value
            self.const_names[name] = key
        self._shapes: dict = {}
        self._flatten, self._unflatten = flatten, unflatten

    def shape_fns(self, ty):
        key = repr(ty)
        if key not in self._shapes:
            i = len(self._shapes)
            variants = self.prog.variants
            fl, un = self._flatten, self._unflatten
            self.env[f"F{i}"] = lambda v, _t=ty: fl(_t, v, variants)
            self.env[f"U{i}"] = lambda c, _t=ty: un(_t, c, variants)
            self._shapes[key] = (f"F{i}", f"U{i}")
        return self._shapes[key]


def _opnd(x) -> str:
    if isinstance(x, Lit):
        return repr(x.value)
    return mangle(x)


def _emit(instrs, ns: _Namespace, lines: list, ind: int, fsize: int) -> None:
    pad = "    " * ind
    for ins in instrs:
        if isinstance(ins, Move):
            lines.append(f"{pad}{mangle(ins.dst)} = {_opnd(ins.src)}")
        elif isinstance(ins, Prim):
            args = [_opnd(a) for a in ins.args]
            tmpl = prims.INLINE.get(ins.op)
            expr = tmpl.format(*args) if tmpl else f"P_{ins.op}({', '.join(args)})"
            lines.append(f"{pad}{mangle(ins.dst)} = {expr}")
        elif isinstance(ins, LoadConst):
            lines.append(f"{pad}{mangle(ins.dst)} = {ns.const_names[ins.name]}")
        elif isinstance(ins, MakeTuple):
            items = "".join(f"{_opnd(a)}, " for a in ins.items)
            lines.append(f"{pad}{mangle(ins.dst)} = ({items})")
        elif isinstance(ins, MakeVariant):
            lines.append(f"{pad}{mangle(ins.dst)} = ({ins.con!r}, {_opnd(ins.arg)})")
        elif isinstance(ins, Proj):
            lines.append(f"{pad}{mangle(ins.dst)} = {_opnd(ins.src)}[{ins.index}]")
        elif isinstance(ins, TestCon):
            lines.append(f"{pad}{mangle(ins.dst)} = {_opnd(ins.src)}[0] == {ins.con!r}")
        elif isinstance(ins, LoadFrame):
            d = mangle(ins.dst)
            if ins.width == 0:
                lines.append(f"{pad}{d} = ()")
            elif ins.width == 1 and _scalar(ins.ty):
                lines.append(f"{pad}{d} = st[fb + {ins.offset}]")
            else:
                _, un = ns.shape_fns(ins.ty)
                lines.append(f"{pad}{d} = {un}(st[fb + {ins.offset}:fb + "
                             f"{ins.offset + ins.width}])")
        elif isinstance(ins, (StoreFrame, StoreCallee, WriteRel)):
            if isinstance(ins, StoreFrame):
                base = f"fb + {ins.offset}"
            elif isinstance(ins, StoreCallee):
                base = f"sp + {ins.offset}"
            else:
                base = _opnd(ins.addr)
            if ins.width == 0:
                continue
            if ins.width == 1 and _scalar(ins.ty):
                lines.append(f"{pad}st[{base}] = {_opnd(ins.src)}")
            else:
                fl, _ = ns.shape_fns(ins.ty)
                lines.append(f"{pad}st[{base}:{base} + {ins.width}] = {fl}({_opnd(ins.src)})")
        elif isinstance(ins, FrameAddr):
            lines.append(f"{pad}{mangle(ins.dst)} = fb + {ins.offset}")
        elif isinstance(ins, Reserve):
            lines.append(f"{pad}if sp + {ins.size} > s.cap:")
            lines.append(f"{pad}    raise StackOverflow('stack capacity of %d cells exceeded'"
                         " % s.cap)")
            lines.append(f"{pad}if len(st) < sp + {ins.size}:")
            lines.append(f"{pad}    st.extend([0] * (sp + {ins.size} - len(st)))")
        elif isinstance(ins, PushFrame):
            lines.append(f"{pad}sp += {ins.size}")
            lines.append(f"{pad}s.sp = sp")
        elif isinstance(ins, PopFrame):
            lines.append(f"{pad}sp -= {ins.size}")
            lines.append(f"{pad}s.sp = sp")
        elif isinstance(ins, Sample):
            args = ", ".join(_opnd(a) for a in ins.args)
            lines.append(f"{pad}{mangle(ins.dst)} = s.rng.{ins.dist}({args})")
        elif isinstance(ins, Score):
            args = "".join(f", {_opnd(a)}" for a in ins.args)
            lines.append(f"{pad}s.logw += LP_{ins.dist}({_opnd(ins.value)}{args})")
        elif isinstance(ins, AddLogWeight):
            lines.append(f"{pad}s.logw += {_opnd(ins.src)}")
        elif isinstance(ins, CallDirect):
            args = "".join(f", {_opnd(a)}" for a in ins.args)
            lines.append(f"{pad}{mangle(ins.dst)} = D_{mangle(ins.fn)}(s{args})")
        elif isinstance(ins, Branch):
            lines.append(f"{pad}if {_opnd(ins.cond)}:")
            n = len(lines)
            _emit(ins.thn, ns, lines, ind + 1, fsize)
            if len(lines) == n:
                lines.append(f"{pad}    pass")
            if ins.els:
                lines.append(f"{pad}else:")
                n = len(lines)
                _emit(ins.els, ns, lines, ind + 1, fsize)
                if len(lines) == n:
                    lines.append(f"{pad}    pass")
        elif isinstance(ins, SetNext):
            lines.append(f"{pad}nxt = {_tgt(ins.target)}")
        elif isinstance(ins, JumpDirect):
            lines.append(f"{pad}return ({_tgt(ins.target)}, 0)")
        elif isinstance(ins, HaltCheckpoint):
            lines.append(f"{pad}return (nxt, 1)")
        else:
            raise VMError(f"unknown instruction {ins!r}")


def _tgt(t) -> str:
    return str(t) if isinstance(t, int) else mangle(t)


def _scalar(ty) -> bool:
    from .frontend.syntax import TPrim

    return isinstance(ty, TPrim) or ty is None or ty == "ref"


def block_source(prog: BlockProgram, k: int, ns: _Namespace | None = None) -> str:
    ns = ns or _Namespace(prog)
    fsize = prog.info[k].frame_size
    lines = [f"def B{k}(s):",
             "    st = s.stack",
             "    sp = s.sp",
             f"    fb = sp - {fsize}",
             "    nxt = None"]
    _emit(prog.blocks[k], ns, lines, 1, fsize)
    lines.append("    return (nxt, 2)")
    return "\n".join(lines)


def build_executor(prog: BlockProgram) -> list:
    """Translate every block to a Python function (compiled once per program)."""
    ns = _Namespace(prog)
    src = [prog.direct_source]
    for k in range(len(prog.blocks)):
        src.append(block_source(prog, k, ns))
    code = "\n\n".join(src)
    exec(compile(code, "<pcfg>", "exec"), ns.env)
    return [ns.env[f"B{k}"] for k in range(len(prog.blocks))]


def executor_source(prog: BlockProgram) -> str:
    ns = _Namespace(prog)
    return "\n\n".join([prog.direct_source] + [block_source(prog, k, ns)
                                                for k in range(len(prog.blocks))])
