"""From a checked program to a :class:`~pcfgppl.pcfgvm.BlockProgram`.

Functions that may reach a ``resample`` (and the synthetic main) are split
into blocks and get explicit stack frames. All other functions compile to
plain Python functions that the blocks call directly.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

from . import dists
from .analysis import (
    build_call_graph, dump_analysis, parse_analysis, resample_set, validate_analysis,
)
from .anf import normalize_program, parse_anf_dump, validate_anf
from .errors import CompileError, DistParamError, VMError
from .frames import (
    FrameLayout, cell_size, compute_layout, frame_addr, lower_call,
    lower_return, parse_layouts, stmt_defs_uses, validate_layout,
)
from .frontend.desugar import desugar
from .frontend.parser import parse_raw
from .frontend.pretty import pretty
from .frontend.syntax import (
    INT, App, Assume, Builtin, Con, Const, Dist, Let, Match, Observe, PCon, PLit, PRecord,
    PVar, PWild, RecordLit, Resample, SeqLit, TRecord, TUNIT, Var, Weight, pattern_vars,
)
from .frontend.typecheck import MAIN, Program, check_program
from .pcfgvm import (
    STOP, AddLogWeight, BlockInfo, BlockProgram, Branch, CallDirect, HaltCheckpoint, JumpDirect,
    LoadConst, LoadFrame, Lit, MakeTuple, MakeVariant, Move, PopFrame, Prim, Proj, Sample,
    Score, SetNext, StoreFrame, TestCon, mangle, parse_dump, validate_dump,
)
from .prims import INLINE, PRIM_FUNCS
from .stmtir import (
    RET, RETURN, Bind, Jump, TCall, TCheckpoint, TIf, TOther, check_tail_position, decompose,
    dump_blocks, dump_stmts, lower_to_stmts, parse_blocks, parse_stmts, reachable,
)

RET_LOCAL = "%ret"


def _spine(t):
    fn, args = t.fn, tuple(t.args)
    while isinstance(fn, App):
        args = tuple(fn.args) + args
        fn = fn.fn
    return fn, args


def _operand(t):
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return Lit(t.value)
    raise CompileError(f"expected an atom, found {type(t).__name__}", "codegen")


# ------------------------------------------------------------------ constant checks


def check_constant_dist_params(fun, consts) -> None:
    """Reject distributions whose parameters are known at compile time to be
    outside their domain (e.g. a zero standard deviation)."""
    known = {n: v for n, (_, v) in consts.items()}

    def value(a):
        if isinstance(a, Const) and not isinstance(a.value, Builtin):
            return True, a.value
        if isinstance(a, Var) and a.name in known:
            return True, known[a.name]
        return False, None

    def check_dist(d):
        vals = [v if ok else None for ok, v in map(value, d.args)]
        try:
            dists.check_known_params(d.name, vals)
        except DistParamError as e:
            raise CompileError(f"in {fun.name}: {e}", "codegen", d.loc) from None

    def walk(t):
        while isinstance(t, Let):
            rhs = t.rhs
            if isinstance(rhs, App):
                fn, args = _spine(rhs)
                vals = [value(a) for a in args]
                if (isinstance(fn, Const) and isinstance(fn.value, Builtin)
                        and all(ok for ok, _ in vals)):
                    try:
                        known[t.name] = PRIM_FUNCS[fn.value.name](*[v for _, v in vals])
                    except (ArithmeticError, ValueError, VMError):
                        pass
            elif isinstance(rhs, Const) and not isinstance(rhs.value, Builtin):
                known[t.name] = rhs.value
            elif isinstance(rhs, Match):
                walk(rhs.thn)
                walk(rhs.els)
            elif isinstance(rhs, (Assume, Observe)):
                check_dist(rhs.dist)
            t = t.body
        if isinstance(t, Match):
            walk(t.thn)
            walk(t.els)
        elif isinstance(t, (Assume, Observe)):
            check_dist(t.dist)

    walk(fun.body)


def binder_preorder(body) -> list:
    """Let and pattern binders of an ANF body in source (pre)order."""
    out = []
    stack = [body]
    while stack:
        t = stack.pop()
        if isinstance(t, Let):
            out.append(t.name)
            stack += [t.body, t.rhs]
        elif isinstance(t, Match):
            out += pattern_vars(t.pat)
            stack += [t.els, t.thn]
    return out


# ------------------------------------------------------------------ block code


class _BlockGen:
    def __init__(self, cg: "_Codegen", fun, layout: FrameLayout, offset: int):
        self.cg = cg
        self.fun = fun
        self.layout = layout
        self.offset = offset
        self.tmp_counter = 0

    def tmp(self, hint="c") -> str:
        self.tmp_counter += 1
        return f"%{hint}{self.tmp_counter}"

    def ty(self, name):
        if name == RET_LOCAL:
            return self.fun.ret
        if name in self.fun.types:
            return self.fun.types[name]
        return self.cg.program.consts[name][0]

    def width(self, ty) -> int:
        return cell_size(ty, self.cg.program.variants)

    def target(self, n) -> int:
        return self.offset + n

    def block(self, stmts) -> tuple:
        defs, uses = stmt_defs_uses(stmts)
        defined = set(defs)
        out = []
        for v in sorted(set(uses) - defined):
            if v in self.fun.types and self.layout.has_slot(v):
                ty = self.fun.types[v]
                out.append(LoadFrame(v, self.layout.slot(v), ty, self.width(ty)))
            elif v in self.fun.types and self.width(self.fun.types[v]) == 0:
                out.append(Move(v, Lit(())))
            elif v in self.cg.program.consts:
                out.append(LoadConst(v, v))
            else:
                raise CompileError(f"{self.fun.name}: variable {v} is not available in its block",
                                   "codegen")
        out += self.stmts(stmts)
        return tuple(out)

    def store_if_live(self, v) -> list:
        if self.layout.has_slot(v):
            ty = self.fun.types[v]
            return [StoreFrame(self.layout.slot(v), v, ty, self.width(ty))]
        return []

    def stmts(self, stmts) -> list:
        out = []
        for s in stmts:
            if isinstance(s, TOther):
                dest = RET_LOCAL if s.payload.dest == RET else s.payload.dest
                out += self.op(dest, s.payload.rhs)
                if dest != RET_LOCAL:
                    out += self.store_if_live(dest)
            elif isinstance(s, TIf):
                out += self.branch(s)
            elif isinstance(s, TCheckpoint):
                out += self.checkpoint(s)
            elif isinstance(s, TCall):
                out += self.call(s)
            elif isinstance(s, Jump):
                out += self.jump(s.next)
            else:
                raise CompileError(f"unexpected statement {s!r}", "codegen")
        return out

    def op(self, d, rhs) -> list:
        if isinstance(rhs, (Var, Const)):
            return [Move(d, _operand(rhs))]
        if isinstance(rhs, App):
            fn, args = _spine(rhs)
            ops = tuple(_operand(a) for a in args)
            if isinstance(fn, Const) and isinstance(fn.value, Builtin):
                return [Prim(d, fn.value.name, ops)]
            if isinstance(fn, Var) and fn.name in self.cg.direct:
                return [CallDirect(d, fn.name, ops)]
            raise CompileError(f"call to {fn!r} cannot be compiled here", "codegen")
        if isinstance(rhs, Assume):
            return [Sample(d, rhs.dist.name, tuple(_operand(a) for a in rhs.dist.args))]
        if isinstance(rhs, Observe):
            return [Score(rhs.dist.name, tuple(_operand(a) for a in rhs.dist.args),
                          _operand(rhs.value)), Move(d, Lit(()))]
        if isinstance(rhs, Weight):
            return [AddLogWeight(_operand(rhs.arg)), Move(d, Lit(()))]
        if isinstance(rhs, Con):
            return [MakeVariant(d, rhs.name, _operand(rhs.arg))]
        if isinstance(rhs, RecordLit):
            items = tuple(_operand(v) for _, v in sorted(rhs.fields, key=lambda f: f[0]))
            return [MakeTuple(d, items)]
        if isinstance(rhs, SeqLit):
            return [MakeTuple(d, tuple(_operand(v) for v in rhs.items))]
        raise CompileError(f"cannot compile {type(rhs).__name__} here", "codegen")

    def pattern(self, target, pat):
        """(pre-instructions, condition operand, binding instructions)."""
        t = _operand(target)
        if isinstance(pat, (PVar, PWild)):
            binds = [Move(pat.name, t)] + self.store_if_live(pat.name) if isinstance(pat, PVar) else []
            return [], Lit(True), binds
        if isinstance(pat, PLit):
            v = pat.value
            if v is True:
                return [], t, []
            c = self.tmp()
            if v is False:
                return [Prim(c, "not", (t,))], c, []
            op = "eqf" if isinstance(v, float) else "eqi"
            return [Prim(c, op, (t, Lit(v)))], c, []
        if isinstance(pat, PCon):
            c = self.tmp()
            payload_ty = self.cg.program.con_payload(pat.name)
            binds = []
            sub = pat.sub
            if isinstance(sub, PVar):
                binds = [Proj(sub.name, t, 1)] + self.store_if_live(sub.name)
            elif isinstance(sub, PRecord):
                p = self.tmp("p")
                binds = [Proj(p, t, 1)] + self.record_binds(p, sub, payload_ty)
            elif not isinstance(sub, PWild):
                raise CompileError("nested pattern survived desugaring", "codegen")
            return [TestCon(c, t, pat.name)], c, binds
        if isinstance(pat, PRecord):
            ty = self.ty(target.name) if isinstance(target, Var) else TUNIT
            return [], Lit(True), self.record_binds(t, pat, ty)
        raise CompileError(f"unsupported pattern {pat!r}", "codegen")

    def record_binds(self, src, pat: PRecord, ty) -> list:
        if not isinstance(ty, TRecord):
            raise CompileError(f"record pattern on non-record type {ty}", "codegen")
        labels = ty.labels()
        out = []
        for label, sub in pat.fields:
            if isinstance(sub, PVar):
                out.append(Proj(sub.name, src, labels.index(label)))
                out += self.store_if_live(sub.name)
            elif not isinstance(sub, PWild):
                raise CompileError("nested pattern survived desugaring", "codegen")
        return out

    def branch(self, s: TIf) -> list:
        info = s.payload
        pre, cond, binds = self.pattern(info.target, info.pat)
        thn = binds + self.stmts(s.thn)
        els = self.stmts(s.els)
        return pre + [Branch(cond, tuple(thn), tuple(els))]

    def checkpoint(self, s: TCheckpoint) -> list:
        if s.next is RETURN:
            ra = self.tmp("ra")
            return [LoadFrame(ra, self.layout.ra, INT), PopFrame(self.layout.size),
                    SetNext(ra), HaltCheckpoint()]
        return [SetNext(self.target(s.next)), HaltCheckpoint()]

    def call(self, s: TCall) -> list:
        b = s.payload
        fn, args = _spine(b.rhs)
        g = self.cg.funs[fn.name]
        callee = self.cg.layouts[fn.name]
        entry = self.cg.entries[fn.name]
        argmap = {p: (_operand(a), ty) for p, a, ty in zip(g.params, args, g.param_types)}
        if s.next is RETURN:
            if b.dest != RET:
                raise CompileError("call in tail position must return its result", "codegen")
            ra, rvl = self.tmp("ra"), self.tmp("rvl")
            pre = [LoadFrame(ra, self.layout.ra, INT),
                   LoadFrame(rvl, self.layout.ret_val_loc, INT),
                   PopFrame(self.layout.size)]
            return pre + lower_call(callee, entry, ra, rvl, argmap)
        if b.dest == RET:
            raise CompileError("a call returning the function result must be a tail call",
                               "codegen")
        addr = self.tmp("a")
        return [frame_addr(self.layout, b.dest, addr)] + lower_call(
            callee, entry, self.target(s.next), addr, argmap)

    def jump(self, n) -> list:
        if n is RETURN:
            ty = self.fun.ret
            return lower_return(self.layout, RET_LOCAL, ty, self.width(ty),
                                self.tmp("rvl"), self.tmp("ra"))
        return [JumpDirect(self.target(n))]


# ------------------------------------------------------------------ direct functions


class _PyGen:
    """Python source for a resample-free function."""

    def __init__(self, cg: "_Codegen", fun):
        self.cg = cg
        self.fun = fun
        self.lines: list = []
        self.counter = 0

    def name(self, v) -> str:
        if v in self.fun.types:
            return mangle(v)
        if v in self.cg.program.consts:
            return self.cg.const_keys[v]
        raise CompileError(f"{self.fun.name}: unknown variable {v}", "codegen")

    def atom(self, t) -> str:
        if isinstance(t, Var):
            return self.name(t.name)
        v = t.value
        if isinstance(v, float) and not math.isfinite(v):
            return f"float({str(v)!r})"
        return repr(v)

    def source(self) -> str:
        params = "".join(f", {mangle(p)}" for p in self.fun.params)
        self.lines = [f"def D_{mangle(self.fun.name)}(s{params}):"]
        self.body(self.fun.body, 1, None)
        return "\n".join(self.lines)

    def emit(self, ind, text):
        self.lines.append("    " * ind + text)

    def body(self, t, ind, dest):
        """Emit ``t``; its value is returned (dest None) or assigned to dest."""
        while isinstance(t, Let):
            if isinstance(t.rhs, Match):
                self.match(t.rhs, ind, mangle(t.name))
            else:
                self.assign(mangle(t.name), t.rhs, ind)
            t = t.body
        if isinstance(t, Match):
            self.match(t, ind, dest)
            return
        if dest is None:
            tmp = "r_"
            self.assign(tmp, t, ind)
            self.emit(ind, f"return {tmp}")
        else:
            self.assign(dest, t, ind)

    def assign(self, d, rhs, ind):
        if isinstance(rhs, (Var, Const)):
            self.emit(ind, f"{d} = {self.atom(rhs)}")
        elif isinstance(rhs, App):
            fn, args = _spine(rhs)
            a = [self.atom(x) for x in args]
            if isinstance(fn, Const) and isinstance(fn.value, Builtin):
                tmpl = INLINE.get(fn.value.name)
                expr = tmpl.format(*a) if tmpl else f"P_{fn.value.name}({', '.join(a)})"
            elif isinstance(fn, Var) and fn.name in self.cg.direct:
                expr = f"D_{mangle(fn.name)}(s{''.join(', ' + x for x in a)})"
            else:
                raise CompileError(f"{self.fun.name}: cannot call {fn!r} directly", "codegen")
            self.emit(ind, f"{d} = {expr}")
        elif isinstance(rhs, Assume):
            a = ", ".join(self.atom(x) for x in rhs.dist.args)
            self.emit(ind, f"{d} = s.rng.{rhs.dist.name}({a})")
        elif isinstance(rhs, Observe):
            a = "".join(", " + self.atom(x) for x in rhs.dist.args)
            self.emit(ind, f"s.logw += LP_{rhs.dist.name}({self.atom(rhs.value)}{a})")
            self.emit(ind, f"{d} = ()")
        elif isinstance(rhs, Weight):
            self.emit(ind, f"s.logw += {self.atom(rhs.arg)}")
            self.emit(ind, f"{d} = ()")
        elif isinstance(rhs, Con):
            self.emit(ind, f"{d} = ({rhs.name!r}, {self.atom(rhs.arg)})")
        elif isinstance(rhs, RecordLit):
            items = "".join(self.atom(v) + ", " for _, v in sorted(rhs.fields, key=lambda f: f[0]))
            self.emit(ind, f"{d} = ({items})")
        elif isinstance(rhs, SeqLit):
            self.emit(ind, f"{d} = ({''.join(self.atom(v) + ', ' for v in rhs.items)})")
        elif isinstance(rhs, Resample):
            raise CompileError(f"{self.fun.name}: resample in a direct function", "codegen")
        else:
            raise CompileError(f"cannot compile {type(rhs).__name__}", "codegen")

    def match(self, m: Match, ind, dest):
        t = self.atom(m.target)
        pat = m.pat
        binds = []
        if isinstance(pat, PVar):
            cond, binds = None, [f"{mangle(pat.name)} = {t}"]
        elif isinstance(pat, PWild):
            cond = None
        elif isinstance(pat, PLit):
            cond = t if pat.value is True else f"not {t}" if pat.value is False else \
                f"{t} == {pat.value!r}"
        elif isinstance(pat, PCon):
            cond = f"{t}[0] == {pat.name!r}"
            sub = pat.sub
            if isinstance(sub, PVar):
                binds = [f"{mangle(sub.name)} = {t}[1]"]
            elif isinstance(sub, PRecord):
                labels = self.cg.program.con_payload(pat.name).labels()
                binds = [f"{mangle(v.name)} = {t}[1][{labels.index(l)}]"
                         for l, v in sub.fields if isinstance(v, PVar)]
        elif isinstance(pat, PRecord):
            ty = self.fun.types.get(m.target.name) if isinstance(m.target, Var) else None
            if ty is None and isinstance(m.target, Var):
                ty = self.cg.program.consts[m.target.name][0]
            labels = ty.labels()
            cond = None
            binds = [f"{mangle(v.name)} = {t}[{labels.index(l)}]"
                     for l, v in pat.fields if isinstance(v, PVar)]
        else:
            raise CompileError(f"unsupported pattern {pat!r}", "codegen")
        if cond is None:
            for b in binds:
                self.emit(ind, b)
            self.body(m.thn, ind, dest)
            return
        self.emit(ind, f"if {cond}:")
        for b in binds:
            self.emit(ind + 1, b)
        self.body(m.thn, ind + 1, dest)
        self.emit(ind, "else:")
        self.body(m.els, ind + 1, dest)


# ------------------------------------------------------------------ driver


class _Codegen:
    def __init__(self, program: Program):
        self.program = program
        self.funs = dict(program.funcs)
        self.funs[MAIN] = program.main
        graph = build_call_graph(program)
        self.graph = graph
        self.rs = resample_set(graph)
        self.decomposed = [MAIN] + [f for f in program.funcs if f in self.rs]
        self.direct = [f for f in program.funcs if f not in self.rs]
        self.const_keys = {n: f"K{i}" for i, n in enumerate(program.consts)}
        self.stmts: dict = {}
        self.blocks: dict = {}
        self.layouts: dict = {}
        self.entries: dict = {}

    def run(self) -> BlockProgram:
        variants = self.program.variants
        offset = 0
        for name in self.decomposed:
            f = self.funs[name]
            check_constant_dist_params(f, self.program.consts)
            stmts = lower_to_stmts(f.body, self.rs)
            blocks = decompose(stmts)
            self.stmts[name] = stmts
            self.blocks[name] = blocks
            self.layouts[name] = compute_layout(name, f.params, f.param_types, blocks, f.types,
                                                variants, binder_preorder(f.body))
            self.entries[name] = offset
            offset += len(blocks)
        for name in self.direct:
            check_constant_dist_params(self.funs[name], self.program.consts)

        all_blocks, info = [], []
        for name in self.decomposed:
            f = self.funs[name]
            gen = _BlockGen(self, f, self.layouts[name], self.entries[name])
            for k in sorted(self.blocks[name]):
                all_blocks.append(gen.block(self.blocks[name][k]))
                info.append(BlockInfo(name, k, self.layouts[name].size))

        direct_src = "\n\n".join(_PyGen(self, self.funs[n]).source() for n in self.direct)
        ret = self.program.main.ret
        prog = BlockProgram(
            blocks=all_blocks, info=info, entry=0, stop=STOP, layouts=dict(self.layouts),
            consts=dict(self.program.consts), variants=variants,
            function_entries=dict(self.entries), return_targets=self.return_targets(),
            direct_source=direct_src, direct_functions=tuple(self.direct),
            result_type=ret, result_width=cell_size(ret, variants),
            main_frame_size=self.layouts[MAIN].size)
        prog.validate()
        return prog

    def return_targets(self) -> dict:
        """Blocks each decomposed function may return to, by fixed point."""
        rt = {n: set() for n in self.decomposed}
        rt[MAIN].add(STOP)
        calls = []  # (caller, callee, return block or None for a tail call)

        def walk(fn, stmts):
            for s in stmts:
                if isinstance(s, TIf):
                    walk(fn, s.thn)
                    walk(fn, s.els)
                elif isinstance(s, TCall):
                    callee = _spine(s.payload.rhs)[0].name
                    r = None if s.next is RETURN else self.entries[fn] + s.next
                    calls.append((fn, callee, r))

        for fn in self.decomposed:
            for stmts in self.blocks[fn].values():
                walk(fn, stmts)
        changed = True
        while changed:
            changed = False
            for caller, callee, r in calls:
                add = rt[caller] if r is None else {r}
                if not add <= rt[callee]:
                    rt[callee] |= add
                    changed = True
        return rt


def compile_checked(program: Program) -> BlockProgram:
    """Compile a checked, ANF-normalized program."""
    return _Codegen(program).run()


# ------------------------------------------------------------------ pipeline


STAGES = ("ast", "anf", "analysis", "stmt", "blocks", "frames", "pcfg")


@dataclass
class Compilation:
    source: str
    term: object
    checked: Program
    anf: Program
    graph: object
    resample_set: set
    stmts: dict
    blocks: dict
    layouts: dict
    pcfg: BlockProgram
    direct: list = field(default_factory=list)

    def emit(self, stage: str) -> str:
        if stage == "ast":
            return pretty(self.term)
        if stage == "anf":
            return "\n\n".join(f"-- {f.name}({', '.join(f.params)})\n{pretty(f.body)}"
                               for f in self.anf.all_functions())
        if stage == "analysis":
            return dump_analysis(self.graph, self.resample_set)
        if stage == "stmt":
            return "\n\n".join(f"-- {n}\n{dump_stmts(s, with_payload=True)}"
                               for n, s in self.stmts.items())
        if stage == "blocks":
            return "\n\n".join(f"-- {n}\n{dump_blocks(b, with_payload=True)}"
                               for n, b in self.blocks.items())
        if stage == "frames":
            return "\n".join(str(l) for l in self.layouts.values())
        if stage == "pcfg":
            return self.pcfg.dump()
        raise ValueError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")


def compile_source(source: str) -> Compilation:
    """Run the whole pipeline on program text."""
    if sys.getrecursionlimit() < 20000:
        sys.setrecursionlimit(20000)
    term = desugar(parse_raw(source))
    checked = check_program(term)
    anf = normalize_program(checked)
    for f in anf.all_functions():
        if not validate_anf(f.body):
            raise CompileError(f"internal error: {f.name} is not in A-normal form", "anf")
    cg = _Codegen(anf)
    prog = cg.run()
    return Compilation(source, term, checked, anf, cg.graph, cg.rs, cg.stmts, cg.blocks, cg.layouts,
                       prog, cg.direct)


def compile_file(path) -> Compilation:
    with open(path, encoding="utf-8") as fh:
        return compile_source(fh.read())


def validate_stage(stage: str, text: str) -> bool:
    """Read a stage dump back and check it with that stage's own validator."""
    if stage == "ast":
        t = parse_raw(text)
        return parse_raw(pretty(t)) == t
    if stage == "anf":
        funs = parse_anf_dump(text)
        return bool(funs) and all(validate_anf(body) for _, body in funs.values())
    if stage == "analysis":
        return validate_analysis(*parse_analysis(text))
    if stage in ("stmt", "blocks"):
        for section in text.strip().split("\n\n"):
            head, _, body = section.partition("\n")
            if not head.startswith("-- "):
                return False
            if stage == "stmt":
                parse_stmts(body)
            else:
                blocks = parse_blocks(body)
                if not (check_tail_position(blocks) and reachable(blocks) == set(blocks)):
                    return False
        return True
    if stage == "frames":
        return all(validate_layout(slots, size) for slots, size in parse_layouts(text).values())
    if stage == "pcfg":
        return validate_dump(parse_dump(text)[0])
    raise ValueError(f"unknown stage {stage!r}")
