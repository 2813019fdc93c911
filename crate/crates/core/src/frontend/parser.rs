//! Recursive-descent parser for `.nil` sources.
//!
//! ```text
//! program  := decl* proc*
//! decl     := ("low" | "high") IDENT ("," IDENT)* ";"
//! proc     := "proc" IDENT "(" [ "in" IDENT "," "out" IDENT ] ")" block
//! block    := "{" stmt* "}"
//! stmt     := "skip" ";"
//!           | IDENT ":=" expr ";"
//!           | IDENT "++" ";" | IDENT "--" ";"
//!           | IDENT "(" expr "," IDENT ")" ";"
//!           | "if" "(" expr ")" block [ "else" block ]
//!           | "while" "(" expr ")" block
//!           | "letvar" IDENT ":=" expr "in" block
//! expr     := or
//! or       := and ("||" and)*
//! and      := cmp ("&&" cmp)*
//! cmp      := sum (("=="|"!="|"<"|"<="|">"|">=") sum)*
//! sum      := prod (("+"|"-") prod)*
//! prod     := unary ("*" unary)*
//! unary    := "!" unary | atom
//! atom     := NUM | "true" | "false" | IDENT | "(" expr ")"
//! ```

use super::ast::{BinOp, Expr, GlobalDecl, Label, ProcDecl, Program, Span, Stmt, StmtKind};
use super::lexer::{Token, TokenKind};
use super::FrontendError;

pub fn parse(tokens: &[Token]) -> Result<Program, FrontendError> {
    Parser { tokens, pos: 0 }.program()
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|t| t.span)
            .unwrap_or_default()
    }

    fn error(&self, expected: &[&str]) -> FrontendError {
        FrontendError::Syntax {
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self
                .peek()
                .map(|k| k.to_string())
                .unwrap_or_else(|| "end of input".to_string()),
            span: self.span(),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), FrontendError> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(self.error(&[&kind.to_string()]))
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                Ok(name.clone())
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn program(&mut self) -> Result<Program, FrontendError> {
        let mut globals = Vec::new();
        let mut procedures = Vec::new();
        loop {
            match self.peek() {
                Some(TokenKind::KwLow) | Some(TokenKind::KwHigh) => {
                    let label = if self.eat(&TokenKind::KwLow) {
                        Label::Low
                    } else {
                        self.pos += 1;
                        Label::High
                    };
                    loop {
                        let span = self.span();
                        let name = self.ident()?;
                        globals.push(GlobalDecl { name, label, span });
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                    self.expect(TokenKind::Semi)?;
                }
                Some(TokenKind::KwProc) => procedures.push(self.procedure()?),
                None => break,
                Some(_) => return Err(self.error(&["`low`", "`high`", "`proc`"])),
            }
        }
        Ok(Program {
            globals,
            procedures,
        })
    }

    fn procedure(&mut self) -> Result<ProcDecl, FrontendError> {
        let span = self.span();
        self.expect(TokenKind::KwProc)?;
        let name = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let (in_param, out_param) = if self.eat(&TokenKind::RParen) {
            (None, None)
        } else {
            self.expect(TokenKind::KwIn)?;
            let input = self.ident()?;
            self.expect(TokenKind::Comma)?;
            self.expect(TokenKind::KwOut)?;
            let output = self.ident()?;
            self.expect(TokenKind::RParen)?;
            (Some(input), Some(output))
        };
        let body = self.block()?;
        Ok(ProcDecl {
            name,
            in_param,
            out_param,
            body,
            span,
        })
    }

    fn block(&mut self) -> Result<Stmt, FrontendError> {
        let span = self.span();
        self.expect(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            if self.peek().is_none() {
                return Err(self.error(&["`}`"]));
            }
            stmts.push(self.statement()?);
        }
        Ok(Stmt::block(stmts, span))
    }

    fn statement(&mut self) -> Result<Stmt, FrontendError> {
        let span = self.span();
        match self.peek() {
            Some(TokenKind::KwSkip) => {
                self.pos += 1;
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::skip(span))
            }
            Some(TokenKind::KwIf) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let then_branch = self.block()?;
                let else_branch = if self.eat(&TokenKind::KwElse) {
                    self.block()?
                } else {
                    Stmt::skip(span)
                };
                Ok(Stmt::new(
                    StmtKind::If {
                        cond,
                        then_branch: Box::new(then_branch),
                        else_branch: Box::new(else_branch),
                    },
                    span,
                ))
            }
            Some(TokenKind::KwWhile) => {
                self.pos += 1;
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let body = self.block()?;
                Ok(Stmt::new(
                    StmtKind::While {
                        cond,
                        body: Box::new(body),
                    },
                    span,
                ))
            }
            Some(TokenKind::KwLetvar) => {
                self.pos += 1;
                let name = self.ident()?;
                self.expect(TokenKind::Assign)?;
                let init = self.expr()?;
                self.expect(TokenKind::KwIn)?;
                let body = self.block()?;
                Ok(Stmt::new(
                    StmtKind::LetVar {
                        name,
                        init,
                        body: Box::new(body),
                    },
                    span,
                ))
            }
            Some(TokenKind::Ident(_)) => {
                let name = self.ident()?;
                let kind = match self.peek() {
                    Some(TokenKind::Assign) => {
                        self.pos += 1;
                        let value = self.expr()?;
                        StmtKind::Assign {
                            target: name,
                            value,
                        }
                    }
                    Some(TokenKind::PlusPlus) | Some(TokenKind::MinusMinus) => {
                        let op = if self.eat(&TokenKind::PlusPlus) {
                            BinOp::Add
                        } else {
                            self.pos += 1;
                            BinOp::Sub
                        };
                        StmtKind::Assign {
                            value: Expr::bin(op, Expr::Var(name.clone()), Expr::Const(1)),
                            target: name,
                        }
                    }
                    Some(TokenKind::LParen) => {
                        self.pos += 1;
                        let arg = self.expr()?;
                        self.expect(TokenKind::Comma)?;
                        let out = self.ident()?;
                        self.expect(TokenKind::RParen)?;
                        StmtKind::Call {
                            callee: name,
                            arg,
                            out,
                        }
                    }
                    _ => return Err(self.error(&["`:=`", "`++`", "`--`", "`(`"])),
                };
                self.expect(TokenKind::Semi)?;
                Ok(Stmt::new(kind, span))
            }
            _ => Err(self.error(&["`skip`", "`if`", "`while`", "`letvar`", "identifier"])),
        }
    }

    pub fn expr(&mut self) -> Result<Expr, FrontendError> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek()? {
            TokenKind::OrOr => BinOp::Or,
            TokenKind::AndAnd => BinOp::And,
            TokenKind::EqEq => BinOp::Eq,
            TokenKind::NotEq => BinOp::Ne,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            _ => return None,
        })
    }

    // Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        if self.eat(&TokenKind::Bang) {
            return Ok(self.unary()?.negate());
        }
        match self.peek() {
            Some(TokenKind::Num(n)) => {
                self.pos += 1;
                Ok(Expr::Const(*n))
            }
            Some(TokenKind::KwTrue) => {
                self.pos += 1;
                Ok(Expr::Const(1))
            }
            Some(TokenKind::KwFalse) => {
                self.pos += 1;
                Ok(Expr::Const(0))
            }
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                Ok(Expr::Var(name.clone()))
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            _ => Err(self.error(&["number", "identifier", "`(`", "`!`"])),
        }
    }
}

/// Parses a standalone expression (used for `--assume` constraints).
pub fn parse_expr(tokens: &[Token]) -> Result<Expr, FrontendError> {
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if p.peek_at(0).is_some() {
        return Err(p.error(&["end of expression"]));
    }
    Ok(e)
}
