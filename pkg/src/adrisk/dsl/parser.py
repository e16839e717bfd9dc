"""Recursive-descent parser for the block-structured modeling language."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

from ..errors import DuplicateBlock, RateOutOfRange, UnclosedBlock, UnexpectedToken
from . import ast
from .lexer import Token, TokenType, tokenize

T = TokenType

_COMPARISONS = {T.LT: "<", T.LE: "<=", T.GT: ">", T.GE: ">=", T.EQ: "==", T.NE: "!="}
_ADDITIVE = {T.PLUS: "+", T.MINUS: "-"}
_MULTIPLICATIVE = {T.STAR: "*", T.SLASH: "/"}
_RESERVED = {"begin", "end", "and", "or"}

_BLOCK_WORDS = [tuple(kind.split()) for kind in ast.BLOCK_KINDS]
_BLOCK_WORDS.sort(key=len, reverse=True)


def parse(tokens: list[Token]) -> ast.SyntaxTree:
    return _Parser(tokens).parse_tree()


def parse_text(text: str, filename: str = "<input>") -> ast.SyntaxTree:
    return parse(tokenize(text, filename))


def parse_expression(text: str) -> ast.Expr:
    """Parse a standalone expression (used by tests and the CLI)."""
    p = _Parser(tokenize(text))
    e = p.expr()
    p.expect(T.EOF)
    return e


class _Parser:
    def __init__(self, tokens: list[Token]) -> None:
        if not tokens or tokens[-1].type is not T.EOF:
            raise ValueError("token stream must end with EOF")
        self.toks = tokens
        self.i = 0

    # ------------------------------------------------------------ helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.type is not T.EOF:
            self.i += 1
        return t

    def at(self, ttype: TokenType, text: str | None = None) -> bool:
        t = self.tok
        return t.type is ttype and (text is None or t.text == text)

    def at_word(self, word: str) -> bool:
        return self.at(T.IDENT, word)

    def accept(self, ttype: TokenType, text: str | None = None) -> Token | None:
        if self.at(ttype, text):
            return self.advance()
        return None

    def expect(self, ttype: TokenType, text: str | None = None) -> Token:
        if self.at(ttype, text):
            return self.advance()
        want = repr(text) if text is not None else ttype.value
        got = self.tok.text or self.tok.type.value
        raise UnexpectedToken(f"expected {want}, found {got!r}", self.tok.span, expected=want)

    def ident(self) -> ast.Ident:
        t = self.tok
        if t.type is not T.IDENT or t.text in _RESERVED:
            self.expect(T.IDENT)  # raises
        self.advance()
        return ast.Ident(t.text, t.span)

    def number(self, allow_negative: bool = True) -> ast.Num:
        start = self.tok
        neg = False
        if self.at(T.MINUS):
            if not allow_negative:
                raise RateOutOfRange("negative rate", start.span)
            self.advance()
            neg = True
        t = self.expect(T.NUMBER)
        value = Fraction(t.text)
        return ast.Num(-value if neg else value, start.span)

    def integer(self) -> int:
        t = self.tok
        n = self.number(allow_negative=False)
        if n.value.denominator != 1:
            raise UnexpectedToken("expected an integer", t.span, expected="integer")
        return int(n.value)

    def at_block_end(self) -> bool:
        return self.at_word("end") or self.at(T.EOF)

    def skip_commas(self) -> None:
        while self.accept(T.COMMA):
            pass

    # ------------------------------------------------------------ blocks

    def parse_tree(self) -> ast.SyntaxTree:
        blocks: list[ast.Block] = []
        seen: set[str] = set()
        while not self.at(T.EOF):
            begin = self.expect(T.IDENT, "begin")
            kind = self.block_kind(begin)
            if kind in seen:
                raise DuplicateBlock(kind, begin.span)
            seen.add(kind)
            items = _BLOCK_PARSERS[kind](self)
            self.close_block(kind, begin)
            blocks.append(ast.Block(kind, tuple(items), begin.span))
        return ast.SyntaxTree(tuple(blocks))

    def block_kind(self, begin: Token) -> str:
        for words in _BLOCK_WORDS:
            if all(
                self.peek(j).type is T.IDENT and self.peek(j).text == w
                for j, w in enumerate(words)
            ):
                for _ in words:
                    self.advance()
                return " ".join(words)
        raise UnexpectedToken(
            f"unknown block keyword {self.tok.text!r}", self.tok.span, expected="block keyword"
        )

    def close_block(self, kind: str, begin: Token) -> None:
        if self.at(T.EOF):
            raise UnclosedBlock(f"block '{kind}' is never closed", begin.span)
        self.expect(T.IDENT, "end")
        for w in kind.split():
            self.expect(T.IDENT, w)

    # --- simple lists

    def ident_list_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            items.append(self.ident())
            self.skip_commas()
        return items

    def braced_idents(self, open_: TokenType = T.LBRACE, close: TokenType = T.RBRACE) -> tuple[ast.Ident, ...]:
        self.expect(open_)
        out: list[ast.Ident] = []
        if not self.at(close):
            out.append(self.ident())
            while self.accept(T.COMMA):
                out.append(self.ident())
        self.expect(close)
        return tuple(out)

    def countermeasure_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            name = self.ident()
            self.expect(T.ASSIGN)
            items.append(ast.CountermeasureDecl(name, self.braced_idents()))
            self.skip_commas()
        return items

    def diagram_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            parent = self.ident()
            t = self.tok
            k = None
            if t.type is T.ARROW:
                op = "->"
            elif t.type is T.OR_ARROW:
                op = "OR"
            elif t.type is T.AND_ARROW:
                op = "AND"
            elif t.type is T.OAND_ARROW:
                op = "OAND"
            elif t.type is T.K_ARROW:
                op, k = "K", t.k
            else:
                raise UnexpectedToken(
                    f"expected a refinement arrow, found {t.text!r}", t.span, expected="arrow"
                )
            self.advance()
            if op == "OAND":
                children = self.braced_idents(T.LBRACKET, T.RBRACKET)
            else:
                children = self.braced_idents()
            if not children:
                raise UnexpectedToken("empty child list", t.span, expected="identifier")
            items.append(ast.DiagramEdge(parent, op, children, k))
            self.skip_commas()
        return items

    def node_value(self) -> ast.NodeValue:
        node = self.ident()
        self.expect(T.ASSIGN)
        return ast.NodeValue(node, self.number())

    def attributes_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            name = self.ident()
            self.expect(T.ASSIGN)
            self.expect(T.LBRACE)
            values: list[ast.NodeValue] = []
            if not self.at(T.RBRACE):
                values.append(self.node_value())
                while self.accept(T.COMMA):
                    values.append(self.node_value())
            self.expect(T.RBRACE)
            items.append(ast.AttributeDecl(name, tuple(values)))
            self.skip_commas()
        return items

    def node_values_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            items.append(self.node_value())
            self.skip_commas()
        return items

    def effectiveness_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            defender = self.ident()
            self.expect(T.LPAREN)
            attacker = self.ident()
            self.expect(T.COMMA)
            attack = self.ident()
            self.expect(T.RPAREN)
            self.expect(T.ASSIGN)
            items.append(ast.EffectivenessDecl(defender, attacker, attack, self.number()))
            self.skip_commas()
        return items

    def variables_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            name = self.ident()
            self.expect(T.ASSIGN)
            items.append(ast.VariableDecl(name, self.number()))
            self.skip_commas()
        return items

    # --- attacker behavior

    def behavior_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            begin = self.expect(T.IDENT, "begin")
            self.expect(T.IDENT, "attack")
            items.append(self.attack_sub_block(begin))
            if self.at(T.EOF):
                raise UnclosedBlock("block 'attack' is never closed", begin.span)
            self.expect(T.IDENT, "end")
            self.expect(T.IDENT, "attack")
        return items

    def attack_sub_block(self, begin: Token) -> ast.BehaviorDecl:
        attacker: ast.Ident | None = None
        states: tuple[ast.Ident, ...] | None = None
        transitions: tuple[ast.TransitionDecl, ...] | None = None
        while not self.at_block_end():
            key = self.expect(T.IDENT)
            self.expect(T.ASSIGN)
            if key.text == "attacker" and attacker is None:
                attacker = self.ident()
            elif key.text == "states" and states is None:
                names = [self.ident()]
                while self.accept(T.COMMA):
                    names.append(self.ident())
                states = tuple(names)
            elif key.text == "transitions" and transitions is None:
                trans: list[ast.TransitionDecl] = []
                while self.at(T.IDENT) and not self.at_word("end") and self.peek().type is T.MINUS:
                    trans.append(self.transition())
                    if not self.accept(T.COMMA):
                        break
                transitions = tuple(trans)
            else:
                raise UnexpectedToken(
                    f"unexpected key {key.text!r} in attack block",
                    key.span,
                    expected="attacker, states or transitions",
                )
        if attacker is None:
            raise UnexpectedToken("attack block lacks 'attacker ='", begin.span, expected="attacker")
        return ast.BehaviorDecl(attacker, states or (), transitions or (), begin.span)

    def action_ref(self) -> ast.ActionRef:
        name = self.ident()
        if name.name in ast.PREDEFINED_ACTIONS and self.at(T.LPAREN):
            self.advance()
            arg = self.ident()
            self.expect(T.RPAREN)
            return ast.ActionRef(name.name, arg.name, name.span)
        return ast.ActionRef(name.name, None, name.span)

    def transition(self) -> ast.TransitionDecl:
        source = self.ident()
        self.expect(T.MINUS)
        self.expect(T.LPAREN)
        action = self.action_ref()
        self.expect(T.COMMA)
        rate = self.number(allow_negative=False)
        updates: tuple[ast.Update, ...] = ()
        guard: ast.Expr | None = None
        if self.accept(T.COMMA):
            if self.at(T.LBRACE):
                updates = self.updates()
                if self.accept(T.COMMA):
                    guard = self.expr()
            else:
                guard = self.expr()
        self.expect(T.RPAREN)
        self.expect(T.ARROW)
        target = self.ident()
        return ast.TransitionDecl(source, action, rate, updates, guard, target)

    def updates(self) -> tuple[ast.Update, ...]:
        self.expect(T.LBRACE)
        out: list[ast.Update] = []
        if not self.at(T.RBRACE):
            while True:
                var = self.ident()
                self.expect(T.ASSIGN)
                out.append(ast.Update(var, self.expr()))
                if not self.accept(T.COMMA):
                    break
        self.expect(T.RBRACE)
        return tuple(out)

    # --- constraints, init

    def action_constraints_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            self.expect(T.IDENT, "do")
            self.expect(T.LPAREN)
            action = self.action_ref()
            self.expect(T.RPAREN)
            self.expect(T.ARROW)
            items.append(ast.ActionConstraintDecl(action, self.expr()))
            self.skip_commas()
        return items

    def quant_constraints_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            self.expect(T.LBRACE)
            items.append(ast.QuantConstraintDecl(self.expr()))
            self.expect(T.RBRACE)
            self.skip_commas()
        return items

    def init_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            attacker = self.ident()
            self.expect(T.ASSIGN)
            items.append(ast.InitDecl(attacker, self.braced_idents()))
            self.skip_commas()
        return items

    # --- analysis, simulate, export

    def analysis_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            key = self.tok
            if self.at_word("query"):
                self.advance()
                self.expect(T.ASSIGN)
                items.append(self.query(key))
            elif self.at_word("default"):
                self.advance()
                self.expect(T.IDENT, "delta")
                self.expect(T.ASSIGN)
                items.append(ast.Setting("default delta", self.number(), key.span))
            elif self.at_word("alpha") or self.at_word("parallelism"):
                self.advance()
                self.expect(T.ASSIGN)
                items.append(ast.Setting(key.text, self.number(), key.span))
            else:
                raise UnexpectedToken(
                    f"unexpected {key.text!r} in analysis block",
                    key.span,
                    expected="query, default delta, alpha or parallelism",
                )
        return items

    def query(self, start: Token) -> ast.QueryDecl:
        self.expect(T.IDENT, "eval")
        if self.accept(T.IDENT, "from"):
            a = self.integer()
            self.expect(T.IDENT, "to")
            b = self.integer()
            self.expect(T.IDENT, "by")
            c = self.integer()
            self.expect(T.COLON)
            props = self.property_list()
            return ast.QueryDecl("range", props, start=a, stop=b, by=c, span=start.span)
        if self.accept(T.IDENT, "when"):
            self.expect(T.LBRACE)
            cond = self.expr()
            self.expect(T.RBRACE)
            self.expect(T.COLON)
            props = self.property_list()
            return ast.QueryDecl("when", props, condition=cond, span=start.span)
        raise UnexpectedToken(
            f"expected 'from' or 'when', found {self.tok.text!r}", self.tok.span, expected="from or when"
        )

    def property_list(self) -> tuple[ast.PropertyDecl, ...]:
        self.expect(T.LBRACE)
        props: list[ast.PropertyDecl] = []
        while True:
            t = self.tok
            if self.at_word("steps") and self.peek().type in (T.COMMA, T.RBRACE, T.LBRACKET):
                self.advance()
                expr = None
            else:
                expr = self.expr()
            delta = None
            if self.accept(T.LBRACKET):
                self.expect(T.IDENT, "delta")
                self.expect(T.ASSIGN)
                delta = self.number(allow_negative=False)
                self.expect(T.RBRACKET)
            props.append(ast.PropertyDecl(expr, delta, t.span))
            if not self.accept(T.COMMA):
                break
        self.expect(T.RBRACE)
        return tuple(props)

    def simulate_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            key = self.tok
            if self.at_word("seed") or self.at_word("steps"):
                self.advance()
                self.expect(T.ASSIGN)
                items.append(ast.Setting(key.text, ast.Num(Fraction(self.integer()), key.span), key.span))
            elif self.at_word("file"):
                self.advance()
                self.expect(T.ASSIGN)
                items.append(ast.Setting("file", self.expect(T.STRING).text, key.span))
            else:
                raise UnexpectedToken(
                    f"unexpected {key.text!r} in simulate block", key.span, expected="seed, steps or file"
                )
        return items

    def export_block(self) -> list[ast.Item]:
        items: list[ast.Item] = []
        while not self.at_block_end():
            key = self.tok
            if self.at_word("file"):
                self.advance()
                self.expect(T.ASSIGN)
                items.append(ast.Setting("file", self.expect(T.STRING).text, key.span))
            elif self.at_word("label"):
                self.advance()
                self.expect(T.IDENT, "with")
                name = self.expect(T.STRING).text
                self.expect(T.IDENT, "when")
                items.append(ast.LabelDecl(name, self.expr(), key.span))
            else:
                raise UnexpectedToken(
                    f"unexpected {key.text!r} in exportDTMC block", key.span, expected="file or label"
                )
            self.skip_commas()
        return items

    # ------------------------------------------------------------ expressions

    def expr(self) -> ast.Expr:
        return self.or_expr()

    def or_expr(self) -> ast.Expr:
        left = self.and_expr()
        while self.at_word("or"):
            t = self.advance()
            left = ast.Binary("or", left, self.and_expr(), t.span)
        return left

    def and_expr(self) -> ast.Expr:
        left = self.comparison()
        while self.at_word("and"):
            t = self.advance()
            left = ast.Binary("and", left, self.comparison(), t.span)
        return left

    def _binary_level(self, ops: dict[TokenType, str], sub: Callable[[], ast.Expr]) -> ast.Expr:
        left = sub()
        while self.tok.type in ops:
            t = self.advance()
            left = ast.Binary(ops[t.type], left, sub(), t.span)
        return left

    def comparison(self) -> ast.Expr:
        return self._binary_level(_COMPARISONS, self.additive)

    def additive(self) -> ast.Expr:
        return self._binary_level(_ADDITIVE, self.multiplicative)

    def multiplicative(self) -> ast.Expr:
        return self._binary_level(_MULTIPLICATIVE, self.unary)

    def unary(self) -> ast.Expr:
        t = self.tok
        if self.accept(T.NOT):
            return ast.Unary("!", self.unary(), t.span)
        if t.type is T.MINUS and self.peek().type is T.NUMBER:
            return self.number()
        return self.primary()

    def primary(self) -> ast.Expr:
        t = self.tok
        if t.type is T.NUMBER:
            return self.number()
        if self.accept(T.LPAREN):
            e = self.expr()
            self.expect(T.RPAREN)
            return e
        if t.type is T.IDENT and t.text not in _RESERVED:
            self.advance()
            if t.text in ast.CALL_FUNCS and self.at(T.LPAREN):
                self.advance()
                arg = self.ident()
                self.expect(T.RPAREN)
                return ast.Call(t.text, arg.name, t.span)
            return ast.Name(t.text, t.span)
        raise UnexpectedToken(
            f"expected an expression, found {t.text or t.type.value!r}", t.span, expected="expression"
        )


_BLOCK_PARSERS: dict[str, Callable[[_Parser], list[ast.Item]]] = {
    "attack nodes": _Parser.ident_list_block,
    "defense nodes": _Parser.ident_list_block,
    "countermeasure nodes": _Parser.countermeasure_block,
    "attack diagram": _Parser.diagram_block,
    "attributes": _Parser.attributes_block,
    "attack detection rates": _Parser.node_values_block,
    "defense effectiveness": _Parser.effectiveness_block,
    "actions": _Parser.ident_list_block,
    "attacker behavior": _Parser.behavior_block,
    "action constraints": _Parser.action_constraints_block,
    "variables": _Parser.variables_block,
    "quantitative constraints": _Parser.quant_constraints_block,
    "init": _Parser.init_block,
    "analysis": _Parser.analysis_block,
    "simulate": _Parser.simulate_block,
    "exportDTMC": _Parser.export_block,
}
