"""Reader and writer for the domain (.evd), problem (.evp) and plan (.evplan) languages.

All three are parenthesised symbolic expressions with ``;`` line comments;
the grammar is documented in ``docs/grammar.md``.  Plans, statistics and
repair reports additionally have a JSON encoding (``*_to_json``).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable

from .errors import DomainSyntaxError, SemanticError, UnknownOperator
from .model import (
    NUMBER_TYPE,
    ROOT_TYPE,
    Decrement,
    Domain,
    Effects,
    EventSchema,
    ForallEffect,
    GroundStep,
    Literal,
    OperatorSchema,
    Parameter,
    Predicate,
    Problem,
    TypeHierarchy,
    ground,
    is_variable,
)
from .timeline import Branch, Plan

# --------------------------------------------------------------------------
# s-expressions


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int

    @property
    def loc(self):
        return (self.line, self.col)


@dataclass(frozen=True)
class SList:
    items: tuple
    line: int
    col: int

    @property
    def loc(self):
        return (self.line, self.col)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        return iter(self.items)


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")
_INT = re.compile(r"-?\d+$")


def read_sexprs(text: str) -> list:
    """Parse ``text`` into a list of top-level :class:`SList`/:class:`Atom` nodes."""
    stack = [[]]
    opens = []
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rfind("\n") + 1
            continue
        if tok == "(":
            stack.append([])
            opens.append((line, col))
        elif tok == ")":
            if not opens:
                raise DomainSyntaxError("unbalanced ')'", line, col)
            items = stack.pop()
            l, c = opens.pop()
            stack[-1].append(SList(tuple(items), l, c))
        else:
            stack[-1].append(Atom(tok, line, col))
    if opens:
        l, c = opens[-1]
        raise DomainSyntaxError("unclosed '('", l, c)
    return stack[0]


def _one_form(text: str, head: str) -> SList:
    forms = read_sexprs(text)
    if len(forms) != 1 or not isinstance(forms[0], SList):
        where = forms[1].loc if len(forms) > 1 else (1, 1)
        raise DomainSyntaxError(f"expected exactly one ({head} ...) form", *where)
    form = forms[0]
    if not form.items or _sym(form[0]) != head:
        raise DomainSyntaxError(f"expected ({head} ...)", *form.loc)
    return form


def _sym(node) -> str | None:
    return node.text if isinstance(node, Atom) else None


def _need_sym(node, what="symbol") -> str:
    if not isinstance(node, Atom):
        raise DomainSyntaxError(f"expected {what}", *node.loc)
    return node.text


def _need_list(node, what="list") -> SList:
    if not isinstance(node, SList):
        raise DomainSyntaxError(f"expected {what}", *node.loc)
    return node


def _keyword_args(items, start, form) -> dict:
    out = {}
    i = start
    while i < len(items):
        key = items[i]
        if not (isinstance(key, Atom) and key.text.startswith(":")):
            raise DomainSyntaxError("expected a :keyword", *key.loc)
        if i + 1 >= len(items):
            raise DomainSyntaxError(f"missing value for {key.text}", *key.loc)
        if key.text in out:
            raise DomainSyntaxError(f"duplicate {key.text}", *key.loc)
        out[key.text] = (items[i + 1], key)
        i += 2
    return out


def _typed_list(node: SList, allow_multi_parent=False) -> list:
    """``a b - t c - (t1 t2) d`` -> [(name, parents, atom)]; untyped names get ``object``."""
    out, pending = [], []
    items = list(node.items)
    i = 0
    while i < len(items):
        it = items[i]
        if _sym(it) == "-":
            if i + 1 >= len(items) or not pending:
                raise DomainSyntaxError("dangling '-' in typed list", *it.loc)
            tnode = items[i + 1]
            if isinstance(tnode, SList):
                if not allow_multi_parent:
                    raise DomainSyntaxError("expected a single type", *tnode.loc)
                parents = tuple(_need_sym(t, "type name") for t in tnode)
            else:
                parents = (tnode.text,)
            out.extend((name, parents, at) for name, at in pending)
            pending = []
            i += 2
            continue
        pending.append((_need_sym(it, "name"), it))
        i += 1
    out.extend((name, (ROOT_TYPE,), at) for name, at in pending)
    return out


# --------------------------------------------------------------------------
# terms, literals, formulas


def _term(node):
    if isinstance(node, SList):
        if len(node) == 3 and _sym(node[0]) == "-" and _sym(node[1]) and is_variable(node[1].text) \
                and _sym(node[2]) and _INT.match(node[2].text):
            amount = int(node[2].text)
            if amount < 1:
                raise SemanticError("decrement constant must be >= 1", *node[2].loc)
            return Decrement(node[1].text, amount)
        raise DomainSyntaxError("expected a term", *node.loc)
    text = node.text
    if _INT.match(text):
        return int(text)
    return text


def _atom_literal(node, positive=True) -> Literal:
    node = _need_list(node, "literal")
    if not node.items:
        raise DomainSyntaxError("empty literal", *node.loc)
    pred = _need_sym(node[0], "predicate name")
    if pred in ("and", "not", "forall", "when"):
        raise DomainSyntaxError(f"unexpected '{pred}'", *node.loc)
    return Literal(pred, tuple(_term(a) for a in node.items[1:]), positive, node.loc)


def _literal(node) -> Literal:
    node = _need_list(node, "literal")
    if node.items and _sym(node[0]) == "not":
        if len(node) != 2:
            raise DomainSyntaxError("(not ...) takes one literal", *node.loc)
        lit = _atom_literal(node[1], False)
        return Literal(lit.pred, lit.args, False, node.loc)
    return _atom_literal(node)


def parse_formula(node) -> tuple:
    """A conjunction: ``()``, ``(and l...)`` or a single literal."""
    node = _need_list(node, "formula")
    if not node.items:
        return ()
    if _sym(node[0]) == "and":
        return tuple(_literal(n) for n in node.items[1:])
    return (_literal(node),)


def _effect_list(node, positive: bool) -> tuple:
    node = _need_list(node, "effect list")
    out = []
    for item in node:
        item = _need_list(item, "effect")
        if item.items and _sym(item[0]) == "forall":
            out.append(_forall(item))
        else:
            out.append(_atom_literal(item, True))
    return tuple(out)


def _forall(node: SList) -> ForallEffect:
    if len(node) != 3:
        raise DomainSyntaxError("(forall (?v - type) (when cond effect))", *node.loc)
    params = _typed_list(_need_list(node[1], "quantified variable"))
    if len(params) != 1:
        raise DomainSyntaxError("forall binds exactly one variable", *node[1].loc)
    var, (vtype,), at = params[0]
    if not is_variable(var):
        raise DomainSyntaxError("quantified name must start with '?'", *at.loc)
    body = _need_list(node[2], "(when ...)")
    if len(body) != 3 or _sym(body[0]) != "when":
        raise DomainSyntaxError("expected (when condition effect)", *body.loc)
    cond = parse_formula(body[1])
    eff = _need_list(body[2], "effect")
    if eff.items and _sym(eff[0]) == "and":
        lits = tuple(_atom_literal(n) for n in eff.items[1:])
    else:
        lits = (_atom_literal(eff),)
    return ForallEffect(var, vtype, cond, lits, node.loc)


# --------------------------------------------------------------------------
# domain

_OP_KEYS = {":params", ":duration", ":pre", ":add", ":del", ":initial-add", ":initial-del",
            ":final-add", ":final-del"}
_EVENT_KEYS = {":params", ":duration", ":pre", ":add", ":del", ":probability"}


def _params(node) -> tuple:
    out = []
    for name, (ptype,), at in _typed_list(_need_list(node, "parameter list")):
        if not is_variable(name):
            raise DomainSyntaxError("parameter names start with '?'", *at.loc)
        out.append(Parameter(name, ptype))
    return tuple(out)


def _schema(form: SList, kind: str):
    if len(form) < 2:
        raise DomainSyntaxError(f"{kind} needs a name", *form.loc)
    name = _need_sym(form[1], f"{kind} name")
    kw = _keyword_args(form.items, 2, form)
    allowed = _OP_KEYS if kind == ":operator" else _EVENT_KEYS
    for key, (_, at) in kw.items():
        if key not in allowed:
            raise DomainSyntaxError(f"unknown keyword {key} in {kind}", *at.loc)
    params = _params(kw[":params"][0]) if ":params" in kw else ()
    pre = parse_formula(kw[":pre"][0]) if ":pre" in kw else ()
    duration = 0
    if ":duration" in kw:
        dnode, at = kw[":duration"]
        text = _need_sym(dnode, "integer duration")
        if not _INT.match(text):
            raise DomainSyntaxError("duration must be an integer", *dnode.loc)
        duration = int(text)
        if duration < 0:
            raise SemanticError("duration must be non-negative", *dnode.loc)

    def eff(key, positive):
        return _effect_list(kw[key][0], positive) if key in kw else ()

    if kind == ":event":
        if duration != 0:
            raise SemanticError("events must have duration 0", *kw[":duration"][0].loc)
        if ":probability" not in kw:
            raise SemanticError(f"event {name} lacks :probability", *form.loc)
        pnode, _ = kw[":probability"]
        try:
            p = float(_need_sym(pnode, "probability"))
        except ValueError:
            raise DomainSyntaxError("probability must be a number", *pnode.loc) from None
        if not 0.0 < p <= 1.0:
            raise SemanticError(f"probability {p} outside (0, 1]", *pnode.loc)
        effects = Effects(eff(":add", True), eff(":del", False))
        for item in (*effects.adds, *effects.dels):
            if isinstance(item, ForallEffect):
                raise SemanticError("quantified effects are not supported in events", *item.loc)
        return EventSchema(name, params, pre, effects, p, 0, form.loc)

    plain = Effects(eff(":add", True), eff(":del", False))
    initial = Effects(eff(":initial-add", True), eff(":initial-del", False))
    final = Effects(eff(":final-add", True), eff(":final-del", False))
    if duration == 0 and (initial or final):
        raise SemanticError(f"{name}: duration-0 operators use :add/:del only", *form.loc)
    if duration > 0 and plain:
        raise SemanticError(f"{name}: durative operators use :initial-*/:final-* lists", *form.loc)
    return OperatorSchema(name, params, pre, duration, plain, initial, final, form.loc)


def parse_domain(text: str) -> Domain:
    form = _one_form(text, "domain")
    if len(form) < 2:
        raise DomainSyntaxError("domain needs a name", *form.loc)
    name = _need_sym(form[1], "domain name")
    parents = {}
    predicates = {}
    functional = []
    operators, events = {}, {}
    floor = 0
    for sec in form.items[2:]:
        sec = _need_list(sec, "domain section")
        head = _sym(sec[0]) if sec.items else None
        if head == ":types":
            for tname, ps, at in _typed_list(SList(sec.items[1:], sec.line, sec.col), True):
                if tname in parents or tname == NUMBER_TYPE:
                    raise SemanticError(f"duplicate type {tname}", *at.loc)
                parents[tname] = ps
        elif head == ":predicates":
            for p in sec.items[1:]:
                p = _need_list(p, "predicate declaration")
                pname = _need_sym(p[0], "predicate name")
                if pname in predicates:
                    raise SemanticError(f"duplicate predicate {pname}", *p.loc)
                args = _typed_list(SList(p.items[1:], p.line, p.col))
                predicates[pname] = (tuple(t for _, (t,), _ in args), p.loc)
        elif head == ":functional":
            functional.extend(sec.items[1:])
        elif head == ":floor":
            floor = int(_need_sym(sec[1], "integer"))
        elif head in (":operator", ":event"):
            schema = _schema(sec, head)
            if schema.name in operators or schema.name in events:
                raise SemanticError(f"duplicate schema {schema.name}", *sec.loc)
            (operators if head == ":operator" else events)[schema.name] = schema
        else:
            raise DomainSyntaxError(f"unknown domain section {head!r}", *sec.loc)
    try:
        types = TypeHierarchy(parents)
    except SemanticError as exc:
        raise SemanticError(exc.message, *form.loc) from None
    fnames = set()
    for at in functional:
        fname = _need_sym(at, "predicate name")
        if fname not in predicates:
            raise SemanticError(f"unknown functional predicate {fname}", *at.loc)
        if not predicates[fname][0]:
            raise SemanticError(f"functional predicate {fname} needs an argument", *at.loc)
        fnames.add(fname)
    preds = {}
    for pname, (arg_types, loc) in predicates.items():
        for t in arg_types:
            if t not in types:
                raise SemanticError(f"unknown type {t} in predicate {pname}", *loc)
        preds[pname] = Predicate(pname, arg_types, pname in fnames)
    domain = Domain(name, types, preds, operators, events, floor)
    for schema in (*operators.values(), *events.values()):
        _check_schema(schema, domain)
    return domain


def _check_literal(lit: Literal, env: dict, domain: Domain, where: str):
    loc = lit.loc or (None, None)
    pred = domain.predicates.get(lit.pred)
    if pred is None:
        raise SemanticError(f"{where}: unknown predicate {lit.pred}", *loc)
    if len(lit.args) != len(pred.arg_types):
        raise SemanticError(f"{where}: {lit.pred} takes {len(pred.arg_types)} arguments", *loc)
    for a, t in zip(lit.args, pred.arg_types):
        if isinstance(a, Decrement) or isinstance(a, int):
            if t != NUMBER_TYPE:
                raise SemanticError(f"{where}: numeric term in non-numeric slot of {lit.pred}", *loc)
            if isinstance(a, Decrement) and env.get(a.var) != NUMBER_TYPE:
                raise SemanticError(f"{where}: {a.var} is not a numeric parameter", *loc)
        elif is_variable(a):
            if a not in env:
                raise SemanticError(f"{where}: unbound variable {a}", *loc)
            if not domain.types.is_subtype(env[a], t):
                raise SemanticError(f"{where}: {a} of type {env[a]} does not fit {t} in {lit.pred}", *loc)


def _check_schema(schema, domain: Domain):
    env = {}
    for p in schema.params:
        if p.type not in domain.types:
            raise SemanticError(f"{schema.name}: unknown type {p.type}", *(schema.loc or (None, None)))
        env[p.name] = p.type
    for lit in schema.pre:
        _check_literal(lit, env, domain, schema.name)
    for eff in schema.effect_sets():
        for item in (*eff.adds, *eff.dels):
            if isinstance(item, ForallEffect):
                if item.type not in domain.types or item.type == NUMBER_TYPE:
                    raise SemanticError(f"{schema.name}: bad quantifier type {item.type}", *item.loc)
                inner = {**env, item.var: item.type}
                for lit in (*item.condition, *item.literals):
                    _check_literal(lit, inner, domain, schema.name)
            else:
                _check_literal(item, env, domain, schema.name)


# --------------------------------------------------------------------------
# problem


def parse_problem(text: str) -> Problem:
    form = _one_form(text, "problem")
    if len(form) < 2:
        raise DomainSyntaxError("problem needs a name", *form.loc)
    name = _need_sym(form[1], "problem name")
    domain_name, objects, init, goal = None, {}, [], ()
    object_locs = {}
    for sec in form.items[2:]:
        sec = _need_list(sec, "problem section")
        head = _sym(sec[0]) if sec.items else None
        if head == ":domain":
            domain_name = _need_sym(sec[1], "domain name")
        elif head == ":objects":
            for oname, (otype,), at in _typed_list(SList(sec.items[1:], sec.line, sec.col)):
                if oname in objects:
                    raise DomainSyntaxError(f"duplicate object {oname}", *at.loc)
                objects[oname] = otype
                object_locs[oname] = at.loc
        elif head == ":init":
            init.extend(_atom_literal(n) for n in sec.items[1:])
        elif head == ":goal":
            if len(sec) != 2:
                raise DomainSyntaxError("(:goal formula)", *sec.loc)
            goal = parse_formula(sec[1])
        else:
            raise DomainSyntaxError(f"unknown problem section {head!r}", *sec.loc)
    if domain_name is None:
        raise DomainSyntaxError("problem lacks (:domain name)", *form.loc)
    problem = Problem(name, domain_name, objects, tuple(init), goal)
    problem.object_locs = object_locs
    problem.loc = form.loc
    return problem


@dataclass(frozen=True)
class Diagnostic:
    message: str
    line: int | None
    col: int | None

    def __str__(self):
        return f"{self.line}:{self.col}: {self.message}"


def _ground_literal_diags(lit: Literal, domain: Domain, problem: Problem, where: str) -> list:
    loc = lit.loc or getattr(problem, "loc", (None, None))
    pred = domain.predicates.get(lit.pred)
    if pred is None:
        return [Diagnostic(f"{where}: unknown predicate {lit.pred}", *loc)]
    if len(lit.args) != len(pred.arg_types):
        return [Diagnostic(f"{where}: {lit.pred} takes {len(pred.arg_types)} arguments", *loc)]
    out = []
    for a, t in zip(lit.args, pred.arg_types):
        if is_variable(a) or isinstance(a, Decrement):
            out.append(Diagnostic(f"{where}: {lit} is not ground", *loc))
        elif isinstance(a, int):
            if t != NUMBER_TYPE:
                out.append(Diagnostic(f"{where}: number {a} in non-numeric slot of {lit.pred}", *loc))
        elif a not in problem.objects:
            out.append(Diagnostic(f"{where}: undeclared object {a}", *loc))
        elif not domain.types.is_subtype(problem.objects[a], t):
            out.append(Diagnostic(f"{where}: {a} is a {problem.objects[a]}, not a {t}", *loc))
    return out


def validate(domain: Domain, problem: Problem) -> list:
    """Cross-check a problem against its domain; an empty list means well-formed."""
    diags = []
    ploc = getattr(problem, "loc", (None, None))
    if problem.domain_name != domain.name:
        diags.append(Diagnostic(f"problem is for domain {problem.domain_name}, not {domain.name}", *ploc))
    locs = getattr(problem, "object_locs", {})
    for obj, t in problem.objects.items():
        if t not in domain.types or t == NUMBER_TYPE:
            diags.append(Diagnostic(f"object {obj} has unknown type {t}", *locs.get(obj, ploc)))
    seen = {}
    for lit in problem.init:
        d = _ground_literal_diags(lit, domain, problem, "init")
        diags.extend(d)
        if d or not lit.positive:
            continue
        pred = domain.predicates[lit.pred]
        if pred.functional:
            var = lit.fact[:-1]
            if var in seen and seen[var] != lit.fact:
                diags.append(Diagnostic(
                    f"init: functional conflict, {var[0]} {' '.join(map(str, var[1:]))} has "
                    f"values {seen[var][-1]} and {lit.fact[-1]}", *(lit.loc or ploc)))
            seen[var] = lit.fact
    for lit in problem.goal:
        diags.extend(_ground_literal_diags(lit, domain, problem, "goal"))
    for schema in (*domain.operators.values(), *domain.events.values()):
        loc = schema.loc or ploc
        for lit in (*schema.pre, *(l for e in schema.effect_sets() for l in e.literals())):
            for i, a in enumerate(lit.args):
                if isinstance(a, str) and not is_variable(a):
                    if a not in problem.objects:
                        diags.append(Diagnostic(f"{schema.name}: constant {a} is not a declared object",
                                                *(lit.loc or loc)))
                    else:
                        t = domain.predicates[lit.pred].arg_types[i]
                        if not domain.types.is_subtype(problem.objects[a], t):
                            diags.append(Diagnostic(f"{schema.name}: constant {a} does not fit {t}",
                                                    *(lit.loc or loc)))
    return diags


# --------------------------------------------------------------------------
# plans


def _step_text(step: GroundStep) -> str:
    return str(step)


def _formula_text(cond) -> str:
    if not cond:
        return "()"
    return "(and " + " ".join(map(str, cond)) + ")"


def serialize_plan(plan: Plan) -> str:
    lines = ["(plan"]
    _plan_lines(plan, 1, lines)
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def _plan_lines(seg: Plan, depth: int, lines: list):
    pad = "  " * depth
    for step in seg.steps:
        lines.append(pad + _step_text(step))
    if seg.branch is not None:
        b = seg.branch
        lines.append(f"{pad}(branch {_formula_text(b.condition)}")
        lines.append(f"{pad}  (then")
        _plan_lines(b.then, depth + 2, lines)
        lines[-1] += ")"
        lines.append(f"{pad}  (else")
        _plan_lines(b.orelse, depth + 2, lines)
        lines[-1] += "))"


def _resolve_step(node: SList, domain: Domain, problem: Problem) -> GroundStep:
    name = _need_sym(node[0], "operator name")
    schema = domain.operators.get(name)
    if schema is None:
        raise UnknownOperator(f"unknown operator {name}", *node.loc)
    args = [_term(a) for a in node.items[1:]]
    if len(args) != len(schema.params):
        raise DomainSyntaxError(f"{name} takes {len(schema.params)} arguments", *node.loc)
    return ground(schema, dict(zip((p.name for p in schema.params), args)), domain, problem)


def _segment(items, domain, problem) -> Plan:
    steps, branch = [], None
    for i, node in enumerate(items):
        node = _need_list(node, "plan step")
        if node.items and _sym(node[0]) == "branch":
            if i != len(items) - 1:
                raise DomainSyntaxError("a branch must end its segment", *node.loc)
            if len(node) != 4:
                raise DomainSyntaxError("(branch condition (then ...) (else ...))", *node.loc)
            cond = parse_formula(node[1])
            then_node, else_node = _need_list(node[2]), _need_list(node[3])
            if _sym(then_node[0]) != "then" or _sym(else_node[0]) != "else":
                raise DomainSyntaxError("branch sides must be (then ...) and (else ...)", *node.loc)
            branch = Branch(cond, _segment(then_node.items[1:], domain, problem),
                            _segment(else_node.items[1:], domain, problem))
        else:
            steps.append(_resolve_step(node, domain, problem))
    return Plan(tuple(steps), branch)


def parse_plan(text: str, domain: Domain, problem: Problem) -> Plan:
    form = _one_form(text, "plan")
    return _segment(form.items[1:], domain, problem)


# --------------------------------------------------------------------------
# domain/problem writers


def _typed_text(pairs: Iterable) -> str:
    return " ".join(f"{n} - {t}" for n, t in pairs)


def _effect_items_text(items) -> str:
    parts = []
    for item in items:
        if isinstance(item, ForallEffect):
            body = item.literals[0] if len(item.literals) == 1 else None
            eff = str(body) if body is not None else "(and " + " ".join(map(str, item.literals)) + ")"
            parts.append(f"(forall ({item.var} - {item.type}) (when {_formula_text(item.condition)} {eff}))")
        else:
            parts.append(str(item))
    return "(" + " ".join(parts) + ")"


def _schema_text(schema) -> list:
    kind = ":event" if isinstance(schema, EventSchema) else ":operator"
    out = [f"  ({kind} {schema.name}",
           f"    :params ({_typed_text((p.name, p.type) for p in schema.params)})",
           f"    :duration {schema.duration}"]
    if isinstance(schema, EventSchema):
        out.append(f"    :probability {schema.probability!r}")
    out.append(f"    :pre {_formula_text(schema.pre)}")
    if isinstance(schema, EventSchema) or schema.duration == 0:
        sets = ((":add", schema.effects.adds), (":del", schema.effects.dels))
    else:
        sets = ((":initial-add", schema.initial.adds), (":initial-del", schema.initial.dels),
                (":final-add", schema.final.adds), (":final-del", schema.final.dels))
    for key, items in sets:
        if items:
            out.append(f"    {key} {_effect_items_text(items)}")
    out[-1] += ")"
    return out


def serialize_domain(domain: Domain) -> str:
    lines = [f"(domain {domain.name}"]
    if domain.floor:
        lines.append(f"  (:floor {domain.floor})")
    types = []
    for name, ps in domain.types.parents.items():
        if name == ROOT_TYPE:
            continue
        types.append(f"{name} - {ps[0]}" if len(ps) == 1 else f"{name} - ({' '.join(ps)})")
    lines.append("  (:types " + " ".join(types) + ")")
    lines.append("  (:predicates")
    for p in domain.predicates.values():
        args = " ".join(f"?a{i} - {t}" for i, t in enumerate(p.arg_types))
        lines.append(f"    ({p.name}{' ' if args else ''}{args})")
    lines[-1] += ")"
    fn = [p.name for p in domain.predicates.values() if p.functional]
    if fn:
        lines.append("  (:functional " + " ".join(fn) + ")")
    for schema in (*domain.operators.values(), *domain.events.values()):
        lines.extend(_schema_text(schema))
    lines[-1] += ")"
    return "\n".join(lines) + "\n"


def serialize_problem(problem: Problem) -> str:
    lines = [f"(problem {problem.name}", f"  (:domain {problem.domain_name})",
             "  (:objects " + _typed_text(problem.objects.items()) + ")",
             "  (:init"]
    lines.extend("    " + str(l) for l in problem.init)
    lines[-1] += ")"
    lines.append(f"  (:goal {_formula_text(problem.goal)}))")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# JSON encodings


def literal_to_json(lit: Literal):
    return {"pred": lit.pred, "args": list(lit.args), "positive": lit.positive}


def literal_from_json(obj) -> Literal:
    return Literal(obj["pred"], tuple(obj["args"]), obj.get("positive", True))


def step_to_json(step: GroundStep):
    return {"op": step.name, "args": list(step.args)}


def plan_to_json(plan: Plan):
    out = {"steps": [step_to_json(s) for s in plan.steps]}
    if plan.branch is not None:
        out["branch"] = {
            "condition": [literal_to_json(l) for l in plan.branch.condition],
            "then": plan_to_json(plan.branch.then),
            "else": plan_to_json(plan.branch.orelse),
        }
    return out


def plan_from_json(obj, domain: Domain, problem: Problem) -> Plan:
    steps = []
    for s in obj.get("steps", ()):
        schema = domain.operators.get(s["op"])
        if schema is None:
            raise UnknownOperator(s["op"])
        steps.append(ground(schema, dict(zip((p.name for p in schema.params), s["args"])), domain, problem))
    branch = None
    if "branch" in obj:
        b = obj["branch"]
        branch = Branch(tuple(literal_from_json(l) for l in b["condition"]),
                        plan_from_json(b["then"], domain, problem),
                        plan_from_json(b["else"], domain, problem))
    return Plan(tuple(steps), branch)


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent."""
    return json.dumps(obj, indent=2, sort_keys=True)
