"""Stack-frame layouts and the calling convention.

A frame of a decomposed function is a fixed run of cells::

    [ra, retValLoc, params..., cross-block locals..., scratch...]

``ra`` holds the block to continue at after the call returns and
``retValLoc`` a stack-relative address (an offset from the stack base) where
the result must be written. Values occupy contiguous cell runs; see
:func:`cell_size`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CompileError
from .frontend.syntax import (
    INT, App, TPrim, TRecord, TSeq, TVariant, free_vars, pattern_vars,
)
from .pcfgvm import (
    FrameAddr, JumpDirect, Lit, LoadFrame, PopFrame, PushFrame, Reserve, StoreCallee, WriteRel,
)
from .stmtir import RET, Bind, TCall, TIf

# ------------------------------------------------------------------ cells


def cell_size(ty, variants) -> int:
    """Cells needed to store a value of type ``ty``.

    Scalars take one cell and unit none. Records and fixed-length sequences
    are laid out field after field. A non-recursive variant is a tag cell
    followed by room for its largest payload; values of a recursive variant
    are immutable constant data and take one cell holding a reference.
    """
    if isinstance(ty, TPrim):
        return 1
    if isinstance(ty, TRecord):
        return sum(cell_size(t, variants) for _, t in ty.fields)
    if isinstance(ty, TSeq):
        return ty.length * cell_size(ty.elem, variants)
    if isinstance(ty, TVariant):
        info = variants[ty.name]
        if info.recursive:
            return 1
        return 1 + max((cell_size(t, variants) for t in info.cons.values()), default=0)
    raise CompileError(f"type {ty} cannot be stored on the stack", "frames")


def flatten(ty, v, variants) -> list:
    out: list = []
    _flat(ty, v, variants, out)
    return out


def _flat(ty, v, variants, out):
    if isinstance(ty, TPrim):
        out.append(v)
    elif isinstance(ty, TRecord):
        for (_, t), x in zip(ty.fields, v):
            _flat(t, x, variants, out)
    elif isinstance(ty, TSeq):
        for x in v:
            _flat(ty.elem, x, variants, out)
    elif isinstance(ty, TVariant):
        info = variants[ty.name]
        if info.recursive:
            out.append(v)
            return
        con, payload = v
        start = len(out)
        out.append(con)
        _flat(info.cons[con], payload, variants, out)
        out.extend([0] * (start + cell_size(ty, variants) - len(out)))
    else:
        raise CompileError(f"type {ty} cannot be stored on the stack", "frames")


def unflatten(ty, cells, variants):
    v, _ = _unflat(ty, cells, 0, variants)
    return v


def _unflat(ty, cells, i, variants):
    if isinstance(ty, TPrim):
        return cells[i], i + 1
    if isinstance(ty, TRecord):
        vals = []
        for _, t in ty.fields:
            x, i = _unflat(t, cells, i, variants)
            vals.append(x)
        return tuple(vals), i
    if isinstance(ty, TSeq):
        vals = []
        for _ in range(ty.length):
            x, i = _unflat(ty.elem, cells, i, variants)
            vals.append(x)
        return tuple(vals), i
    if isinstance(ty, TVariant):
        info = variants[ty.name]
        if info.recursive:
            return cells[i], i + 1
        con = cells[i]
        payload, _ = _unflat(info.cons[con], cells, i + 1, variants)
        return (con, payload), i + cell_size(ty, variants)
    raise CompileError(f"type {ty} cannot be stored on the stack", "frames")


# ------------------------------------------------------------------ liveness


def rhs_uses(rhs) -> set:
    """Variables read by a statement payload's right-hand side.

    The head of a call is a function name, not a variable.
    """
    if isinstance(rhs, App):
        fn = rhs.fn
        out: set = set()
        while isinstance(fn, App):
            for a in fn.args:
                out |= free_vars(a)
            fn = fn.fn
        for a in rhs.args:
            out |= free_vars(a)
        return out
    return free_vars(rhs)


def stmt_defs_uses(stmts):
    """(definitions, uses) of one block, in order of first occurrence.

    A call's destination counts as defined by the calling block.
    """
    defs: dict = {}
    uses: dict = {}

    def walk(ss):
        for s in ss:
            p = getattr(s, "payload", None)
            if isinstance(s, TIf):
                for v in sorted(rhs_uses(p.target)):
                    uses.setdefault(v, None)
                for v in pattern_vars(p.pat):
                    defs.setdefault(v, None)
                walk(s.thn)
                walk(s.els)
            elif isinstance(p, Bind):
                for v in sorted(rhs_uses(p.rhs)):
                    uses.setdefault(v, None)
                if p.dest != RET:
                    defs.setdefault(p.dest, None)

    walk(stmts)
    return list(defs), list(uses)


def cross_block_locals(blocks) -> set:
    """Variables defined in one block and used in a different one."""
    def_blocks: dict = {}
    use_blocks: dict = {}
    for k, stmts in blocks.items():
        d, u = stmt_defs_uses(stmts)
        for v in d:
            def_blocks.setdefault(v, set()).add(k)
        for v in u:
            use_blocks.setdefault(v, set()).add(k)
    out = set()
    for v, ds in def_blocks.items():
        us = use_blocks.get(v, set())
        if any(u != d for u in us for d in ds):
            out.add(v)
    return out


def discarded_calls(blocks, keep: set) -> list:
    """Destinations of calls whose results are never read afterwards."""
    out = []

    def walk(ss):
        for s in ss:
            if isinstance(s, TIf):
                walk(s.thn)
                walk(s.els)
            elif isinstance(s, TCall) and s.payload.dest != RET and s.payload.dest not in keep:
                out.append(s.payload.dest)

    for stmts in blocks.values():
        walk(stmts)
    return out


# ------------------------------------------------------------------ layouts


@dataclass(frozen=True)
class FrameLayout:
    name: str
    ra: int
    ret_val_loc: int
    params: tuple  # (name, offset, width) per stored parameter
    locals: tuple  # (name, offset, width) per cross-block local
    scratch: int  # offset of the scratch run for discarded call results
    scratch_width: int
    size: int

    def slot(self, name: str) -> int:
        for n, off, _ in self.params + self.locals:
            if n == name:
                return off
        raise KeyError(name)

    def has_slot(self, name: str) -> bool:
        return any(n == name for n, _, _ in self.params + self.locals)

    def slots(self) -> dict:
        d = {"ra": self.ra, "retValLoc": self.ret_val_loc}
        for n, off, _ in self.params + self.locals:
            d[n] = off
        if self.scratch_width:
            d["scratch"] = self.scratch
        return d

    def __str__(self):
        inner = ", ".join(f"{k}: {v}" for k, v in self.slots().items())
        return f"{self.name}: {{{inner}}}  -- frameSize {self.size}"


def binder_order(blocks) -> list:
    """Variables in order of their first definition, block by block."""
    order: dict = {}
    for k in sorted(blocks):
        for v in stmt_defs_uses(blocks[k])[0]:
            order.setdefault(v, None)
    return list(order)


def compute_layout(name, params, param_types, blocks, types, variants,
                   order=None) -> FrameLayout:
    """Layout ``[ra, retValLoc, params..., locals..., scratch]``.

    Zero-width values (unit) get no cells. ``order`` fixes the order of the
    cross-block locals; by default they follow their first definition.
    """
    live = cross_block_locals(blocks)
    order = order if order is not None else binder_order(blocks)
    off = 2
    pslots = []
    for p, ty in zip(params, param_types):
        w = cell_size(ty, variants)
        if w:
            pslots.append((p, off, w))
            off += w
    lslots = []
    for v in order:
        if v in live:
            w = cell_size(types[v], variants)
            if w:
                lslots.append((v, off, w))
                off += w
    scratch_w = max((cell_size(types[v], variants)
                     for v in discarded_calls(blocks, live)), default=0)
    return FrameLayout(name, 0, 1, tuple(pslots), tuple(lslots), off, scratch_w, off + scratch_w)


# ------------------------------------------------------------------ calls


def lower_call(callee: FrameLayout, callee_entry: int, ra, ret_addr, args) -> list:
    """Instructions writing a callee frame above the stack pointer and jumping
    to the callee.

    ``ra`` is the caller's return block (an int) or a local holding one;
    ``ret_addr`` an operand holding the stack-relative result address;
    ``args`` maps parameter names to ``(operand, type)``. The whole frame is
    reserved before any cell is written.
    """
    if isinstance(ra, int):
        ra = Lit(ra)
    out = [Reserve(callee.size),
           StoreCallee(callee.ra, ra, INT),
           StoreCallee(callee.ret_val_loc, ret_addr, INT)]
    for name, off, w in callee.params:
        operand, ty = args[name]
        out.append(StoreCallee(off, operand, ty, w))
    out += [PushFrame(callee.size), JumpDirect(callee_entry)]
    return out


def lower_return(layout: FrameLayout, value, ty, width: int, tmp: str = "%rvl",
                 ra_tmp: str = "%ra") -> list:
    """Write the result at ``stackBase + retValLoc``, pop the frame and jump
    to ``ra``."""
    out = [LoadFrame(tmp, layout.ret_val_loc, INT)]
    if width:
        out.append(WriteRel(tmp, value, ty, width))
    out += [LoadFrame(ra_tmp, layout.ra, INT), PopFrame(layout.size), JumpDirect(ra_tmp)]
    return out


def frame_addr(layout: FrameLayout, dest: str, tmp: str) -> FrameAddr:
    """Stack-relative address of ``dest``'s slot (or the scratch run)."""
    off = layout.slot(dest) if layout.has_slot(dest) else layout.scratch
    return FrameAddr(tmp, off)



def parse_layouts(text: str) -> dict:
    """Inverse of the layout dump: ``name -> (slots dict, frameSize)``."""
    out = {}
    for line in text.strip().splitlines():
        head, _, size = line.partition("-- frameSize")
        name, _, body = head.strip().partition(": {")
        slots = {}
        for item in body.rstrip("} ").split(","):
            if item.strip():
                k, v = item.split(":")
                slots[k.strip()] = int(v)
        out[name] = (slots, int(size))
    return out


def validate_layout(slots: dict, size: int) -> bool:
    """Offsets are distinct and inside the frame; ra and retValLoc come first."""
    offs = list(slots.values())
    return (slots.get("ra") == 0 and slots.get("retValLoc") == 1
            and len(set(offs)) == len(offs) and all(0 <= o < size for o in offs))
