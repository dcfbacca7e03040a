"""Parser and serializer for the restricted TPTP CNF dialect.

Supported input: `cnf(name, role, formula).` lines where formula is a
disjunction of literals, `~` negation, `=` / `!=` equality, uppercase-initial
variables, `%` comments.  One problem per file; the problem family defaults
to the filename up to the first `__`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .fol import (
    FUNCTION,
    PREDICATE,
    App,
    Atom,
    Clause,
    Eq,
    Literal,
    Pred,
    Signature,
    Symbol,
    Term,
    Var,
    clause_text,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Problem:
    name: str
    clauses: tuple[Clause, ...]
    signature: Signature
    family: str

    def clause(self, cid: str) -> Clause:
        for c in self.clauses:
            if c.id == cid:
                return c
        raise KeyError(cid)


def problem_from_clauses(name: str, clauses: list[Clause] | tuple[Clause, ...],
                         family: str | None = None) -> Problem:
    """Build a Problem, deriving the signature from the clauses in text order."""
    functions: dict[str, Symbol] = {}
    predicates: dict[str, Symbol] = {}

    def visit_term(t: Term):
        if isinstance(t, App):
            _register(functions, predicates, t.head)
            for a in t.args:
                visit_term(a)

    for c in clauses:
        for lit in c.literals:
            atom = lit.atom
            if isinstance(atom, Eq):
                visit_term(atom.left)
                visit_term(atom.right)
            else:
                _register(functions, predicates, atom.head)
                for a in atom.args:
                    visit_term(a)
    sig = Signature(tuple(functions.values()), tuple(predicates.values()))
    fam = family if family else name.split("__")[0]
    return Problem(name, tuple(clauses), sig, fam or name)


def _register(functions: dict[str, Symbol], predicates: dict[str, Symbol], sym: Symbol):
    table = functions if sym.kind == FUNCTION else predicates
    other = predicates if sym.kind == FUNCTION else functions
    if sym.name in other:
        raise ValueError(f"symbol {sym.name} used as both function and predicate")
    prev = table.get(sym.name)
    if prev is not None and prev.arity != sym.arity:
        raise ValueError(f"arity conflict for {sym.name}: {prev.arity} vs {sym.arity}")
    table.setdefault(sym.name, sym)


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>%[^\n]*)
      | (?P<neq>!=)
      | (?P<punct>[(),.|~=])
      | (?P<name>[a-z][A-Za-z0-9_]*)
      | (?P<var>[A-Z_][A-Za-z0-9_]*)
      | (?P<num>\d+)
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        value = m.group()
        if kind not in ("ws", "comment"):
            tok_kind = value if kind == "punct" else kind
            tokens.append(_Token(tok_kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.functions: dict[str, Symbol] = {}
        self.predicates: dict[str, Symbol] = {}

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text!r}", tok.line, tok.column)
        return tok

    def fail(self, msg: str, tok: _Token):
        raise ParseError(msg, tok.line, tok.column)

    def symbol(self, name: str, arity: int, kind: str, tok: _Token) -> Symbol:
        table = self.functions if kind == FUNCTION else self.predicates
        other = self.predicates if kind == FUNCTION else self.functions
        if name in other:
            self.fail(f"symbol {name} used as both function and predicate", tok)
        prev = table.get(name)
        if prev is not None:
            if prev.arity != arity:
                self.fail(f"arity conflict for {name}: {prev.arity} vs {arity}", tok)
            return prev
        sym = Symbol(name, arity, kind)
        table[name] = sym
        return sym

    def parse_problem(self, name: str, family: str | None) -> Problem:
        clauses: list[Clause] = []
        ids: set[str] = set()
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind == "name" and tok.text == "cnf":
                clause = self.parse_cnf_line()
                if clause.id in ids:
                    self.fail(f"duplicate clause name {clause.id}", tok)
                ids.add(clause.id)
                clauses.append(clause)
            else:
                self.fail(f"expected 'cnf', found {tok.text!r}", tok)
        sig = Signature(tuple(self.functions.values()), tuple(self.predicates.values()))
        fam = family if family else name.split("__")[0]
        return Problem(name, tuple(clauses), sig, fam or name)

    def parse_cnf_line(self) -> Clause:
        self.expect("name")  # 'cnf'
        self.expect("(")
        cid = self.clause_name()
        self.expect(",")
        self.clause_name()  # role, accepted and dropped
        self.expect(",")
        parens = self.peek().kind == "(" and self._formula_is_parenthesized()
        if parens:
            self.next()
        self.varmap: dict[str, int] = {}
        literals = [self.parse_literal()]
        while self.peek().kind == "|":
            self.next()
            literals.append(self.parse_literal())
        if parens:
            self.expect(")")
        self.expect(")")
        self.expect(".")
        return Clause(cid, tuple(literals))

    def _formula_is_parenthesized(self) -> bool:
        # disambiguate '( lit | ... )' from a formula starting with a term:
        # the opening paren wraps the whole formula iff its matching close
        # is immediately followed by the ')' that closes cnf(...).
        depth = 0
        for idx in range(self.pos, len(self.tokens)):
            kind = self.tokens[idx].kind
            if kind == "(":
                depth += 1
            elif kind == ")":
                depth -= 1
                if depth == 0:
                    return self.tokens[idx + 1].kind == ")"
            elif kind == "." or kind == "eof":
                break
        return False

    def clause_name(self) -> str:
        tok = self.next()
        if tok.kind not in ("name", "var", "num"):
            self.fail(f"expected a name, found {tok.text!r}", tok)
        return tok.text

    def parse_literal(self) -> Literal:
        positive = True
        while self.peek().kind == "~":
            self.next()
            positive = not positive
        tok = self.peek()
        term, head_tok = self.parse_term_or_atom()
        nxt = self.peek()
        if nxt.kind in ("=", "neq"):
            self.next()
            right, right_tok = self.parse_term_or_atom()
            if nxt.kind == "neq":
                positive = not positive
            return Literal(positive, Eq(self._as_term(term, head_tok),
                                        self._as_term(right, right_tok)))
        # plain predicate atom: must be an application, not a variable
        if isinstance(term, Var):
            self.fail("a variable cannot stand alone as an atom", tok)
        assert isinstance(term, App)
        pred = self.symbol(term.head.name, term.head.arity, PREDICATE, head_tok)
        # re-intern argument heads as functions (they already are)
        return Literal(positive, Pred(pred, term.args))

    def _as_term(self, term: Term, tok: _Token) -> Term:
        if isinstance(term, App):
            # heads inside equalities are functions; ensure no predicate reuse
            self.symbol(term.head.name, term.head.arity, FUNCTION, tok)
        return term

    def parse_term_or_atom(self) -> tuple[Term, _Token]:
        """Parse a term; top-level applications are re-kinded by the caller."""
        tok = self.next()
        if tok.kind == "var":
            ordinal = self.varmap.setdefault(tok.text, len(self.varmap))
            return Var(ordinal), tok
        if tok.kind not in ("name", "num"):
            self.fail(f"expected a term, found {tok.text!r}", tok)
        args: list[Term] = []
        if self.peek().kind == "(":
            self.next()
            args.append(self.parse_term())
            while self.peek().kind == ",":
                self.next()
                args.append(self.parse_term())
            self.expect(")")
        # tentatively a function application; caller may re-kind the head
        sym = Symbol(tok.text, len(args), FUNCTION)
        return App(sym, tuple(args)), tok

    def parse_term(self) -> Term:
        tok = self.next()
        if tok.kind == "var":
            ordinal = self.varmap.setdefault(tok.text, len(self.varmap))
            return Var(ordinal)
        if tok.kind not in ("name", "num"):
            self.fail(f"expected a term, found {tok.text!r}", tok)
        args: list[Term] = []
        if self.peek().kind == "(":
            self.next()
            args.append(self.parse_term())
            while self.peek().kind == ",":
                self.next()
                args.append(self.parse_term())
            self.expect(")")
        sym = self.symbol(tok.text, len(args), FUNCTION, tok)
        return App(sym, tuple(args))


_HEADER_RE = re.compile(r"^%\s*(problem|family):\s*(\S+)\s*$", re.MULTILINE)


def parse_cnf(text: str, name: str | None = None, family: str | None = None) -> Problem:
    """Parse a CNF problem; clause variables become first-occurrence ordinals."""
    headers = dict(_HEADER_RE.findall(text))
    if name is None:
        name = headers.get("problem", "problem")
    if family is None:
        family = headers.get("family")
    parser = _Parser(text)
    problem = parser.parse_problem(name, family)
    return _intern_problem(problem)


def _intern_problem(problem: Problem) -> Problem:
    """Re-intern all symbols through the final signature.

    The parser creates tentative function symbols before it knows an
    application is really a predicate; rebuild every clause against the
    signature so that symbol objects are shared and correctly kinded.
    """
    sig = problem.signature
    fnmap = {s.name: s for s in sig.functions}
    prmap = {s.name: s for s in sig.predicates}

    def fix_term(t: Term) -> Term:
        if isinstance(t, Var):
            return t
        return App(fnmap[t.head.name], tuple(fix_term(a) for a in t.args))

    def fix_literal(lit: Literal) -> Literal:
        atom = lit.atom
        if isinstance(atom, Eq):
            return Literal(lit.positive, Eq(fix_term(atom.left), fix_term(atom.right)))
        return Literal(lit.positive, Pred(prmap[atom.head.name],
                                          tuple(fix_term(a) for a in atom.args)))

    clauses = tuple(
        Clause(c.id, tuple(fix_literal(l) for l in c.literals), c.origin)
        for c in problem.clauses
    )
    return Problem(problem.name, clauses, sig, problem.family)


def load_problem(path: str | Path) -> Problem:
    p = Path(path)
    stem = p.stem
    return parse_cnf(p.read_text(), name=stem, family=stem.split("__")[0])


def serialize_cnf(problem: Problem) -> str:
    lines = [f"% problem: {problem.name}", f"% family: {problem.family}"]
    for c in problem.clauses:
        lines.append(f"cnf({c.id}, axiom, {clause_text(c)}).")
    return "\n".join(lines) + "\n"
