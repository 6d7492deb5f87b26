use super::ast::*;
use super::lexer::{tokenize, Lexeme, Tok};
use super::FrontendError;

/// Parses source text into an unvalidated unit with preorder node ids.
pub fn parse_unchecked(text: &str) -> Result<SourceUnit, FrontendError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut unit = parser.unit()?;
    unit.renumber();
    Ok(unit)
}

struct Parser {
    tokens: Vec<Lexeme>,
    pos: usize,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Lexeme {
        let lx = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        lx
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let span = self.span();
        Err(FrontendError::Syntax { line: span.line, col: span.col, msg: msg.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.error(format!("expected {what}, found {}", self.peek().describe()))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.bump().span;
                Ok((name, span))
            }
            other => self.error(format!("expected {what}, found {}", other.describe())),
        }
    }

    fn unit(&mut self) -> PResult<SourceUnit> {
        let mut unit = SourceUnit::default();
        loop {
            match self.peek() {
                Tok::Eof => return Ok(unit),
                Tok::Global => unit.globals.push(self.global()?),
                Tok::Entry => {
                    if unit.entry.is_some() {
                        return self.error("duplicate entry declaration");
                    }
                    self.bump();
                    let (name, _) = self.ident("entry function name")?;
                    self.expect(Tok::Semi, "`;`")?;
                    unit.entry = Some(name);
                }
                Tok::Fn => unit.functions.push(self.function()?),
                other => {
                    return self.error(format!(
                        "expected `fn`, `global` or `entry`, found {}",
                        other.describe()
                    ))
                }
            }
        }
    }

    fn type_tag(&mut self) -> PResult<TypeTag> {
        match self.peek() {
            Tok::IntTy => {
                self.bump();
                if *self.peek() == Tok::LBracket && *self.peek_at(1) == Tok::RBracket {
                    self.bump();
                    self.bump();
                    Ok(TypeTag::IntArray)
                } else {
                    Ok(TypeTag::Int)
                }
            }
            Tok::BoolTy => {
                self.bump();
                Ok(TypeTag::Bool)
            }
            Tok::VoidTy => {
                self.bump();
                Ok(TypeTag::Void)
            }
            other => self.error(format!("expected a type, found {}", other.describe())),
        }
    }

    fn global(&mut self) -> PResult<GlobalDecl> {
        let span = self.expect(Tok::Global, "`global`")?;
        let ty = self.type_tag()?;
        let (name, _) = self.ident("global name")?;
        self.expect(Tok::Assign, "`=`")?;
        let init = self.constant()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(GlobalDecl { name, ty, init, span })
    }

    /// Literal constant: integer (optionally negated), boolean or int array.
    fn constant(&mut self) -> PResult<Value> {
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Value::Bool(true))
            }
            Tok::False => {
                self.bump();
                Ok(Value::Bool(false))
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBracket) {
                    loop {
                        items.push(self.int_constant()?);
                        if self.eat(&Tok::RBracket) {
                            break;
                        }
                        self.expect(Tok::Comma, "`,` or `]`")?;
                    }
                }
                Ok(Value::Array(items))
            }
            _ => Ok(Value::Int(self.int_constant()?)),
        }
    }

    fn int_constant(&mut self) -> PResult<i64> {
        let negative = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(v) => {
                let out = self.int_value(v, negative)?;
                self.bump();
                Ok(out)
            }
            other => self.error(format!("expected integer constant, found {}", other.describe())),
        }
    }

    fn int_value(&self, magnitude: u64, negative: bool) -> PResult<i64> {
        if negative {
            if magnitude == 1u64 << 63 {
                Ok(i64::MIN)
            } else if magnitude < 1u64 << 63 {
                Ok(-(magnitude as i64))
            } else {
                self.error("integer literal out of range")
            }
        } else if magnitude <= i64::MAX as u64 {
            Ok(magnitude as i64)
        } else {
            self.error("integer literal out of range")
        }
    }

    fn function(&mut self) -> PResult<FunctionDef> {
        let span = self.expect(Tok::Fn, "`fn`")?;
        let (name, _) = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let (pname, _) = self.ident("parameter name")?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.type_tag()?;
                params.push(Param { name: pname, ty });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        self.expect(Tok::Arrow, "`->`")?;
        let ret = self.type_tag()?;
        let body = self.block()?;
        Ok(FunctionDef { name, params, ret, body, span })
    }

    fn block(&mut self) -> PResult<AstNode> {
        let span = self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if *self.peek() == Tok::Eof {
                return self.error("unclosed block");
            }
            stmts.push(self.statement()?);
        }
        Ok(AstNode::new(NodeKind::Block, Token::None, span, stmts))
    }

    fn statement(&mut self) -> PResult<AstNode> {
        let span = self.span();
        match self.peek().clone() {
            Tok::IntTy | Tok::BoolTy => {
                let stmt = self.declaration()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(stmt)
            }
            Tok::If => self.if_statement(),
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block()?;
                Ok(AstNode::new(NodeKind::While, Token::None, span, vec![cond, body]))
            }
            Tok::For => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let init = if matches!(self.peek(), Tok::IntTy | Tok::BoolTy) {
                    self.declaration()?
                } else {
                    self.assignment()?
                };
                self.expect(Tok::Semi, "`;`")?;
                let cond = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                let update = self.assignment()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block()?;
                Ok(AstNode::new(NodeKind::For, Token::None, span, vec![init, cond, update, body]))
            }
            Tok::Return => {
                self.bump();
                let children = if *self.peek() == Tok::Semi { vec![] } else { vec![self.expr()?] };
                self.expect(Tok::Semi, "`;`")?;
                Ok(AstNode::new(NodeKind::Return, Token::None, span, children))
            }
            Tok::Throw => {
                self.bump();
                let msg = match self.peek().clone() {
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    other => {
                        return self.error(format!("expected string after `throw`, found {}", other.describe()))
                    }
                };
                self.expect(Tok::Semi, "`;`")?;
                Ok(AstNode::new(NodeKind::Throw, Token::Message(msg), span, vec![]))
            }
            Tok::Output => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let value = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(AstNode::new(NodeKind::Output, Token::None, span, vec![value]))
            }
            Tok::Ident(_) if *self.peek_at(1) == Tok::LParen => {
                let call = self.primary()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(AstNode::new(NodeKind::ExprStmt, Token::None, span, vec![call]))
            }
            Tok::Ident(_) => {
                let stmt = self.assignment()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(stmt)
            }
            other => self.error(format!("expected a statement, found {}", other.describe())),
        }
    }

    fn declaration(&mut self) -> PResult<AstNode> {
        let span = self.span();
        let ty = self.type_tag()?;
        let (name, _) = self.ident("variable name")?;
        self.expect(Tok::Assign, "`=`")?;
        let init = self.expr()?;
        Ok(AstNode::new(NodeKind::VarDecl, Token::Decl(name, ty), span, vec![init]))
    }

    fn assignment(&mut self) -> PResult<AstNode> {
        let span = self.span();
        let (name, name_span) = self.ident("assignment target")?;
        let mut target = AstNode::new(NodeKind::VarRef, Token::Ident(name), name_span, vec![]);
        if self.eat(&Tok::LBracket) {
            let index = self.expr()?;
            self.expect(Tok::RBracket, "`]`")?;
            target = AstNode::new(NodeKind::Index, Token::None, name_span, vec![target, index]);
        }
        self.expect(Tok::Assign, "`=`")?;
        let value = self.expr()?;
        Ok(AstNode::new(NodeKind::Assign, Token::None, span, vec![target, value]))
    }

    fn if_statement(&mut self) -> PResult<AstNode> {
        let span = self.expect(Tok::If, "`if`")?;
        self.expect(Tok::LParen, "`(`")?;
        let cond = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        let then = self.block()?;
        let mut children = vec![cond, then];
        if self.eat(&Tok::Else) {
            if *self.peek() == Tok::If {
                let inner_span = self.span();
                let nested = self.if_statement()?;
                children.push(AstNode::new(NodeKind::Block, Token::None, inner_span, vec![nested]));
            } else {
                children.push(self.block()?);
            }
        }
        Ok(AstNode::new(NodeKind::If, Token::None, span, children))
    }

    fn expr(&mut self) -> PResult<AstNode> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            Tok::Plus => BinaryOp::Add,
            Tok::Minus => BinaryOp::Sub,
            Tok::Star => BinaryOp::Mul,
            Tok::Slash => BinaryOp::Div,
            Tok::Percent => BinaryOp::Rem,
            _ => return None,
        })
    }

    // Precedence climbing, all binary operators left-associative.
    fn binary(&mut self, min_prec: u8) -> PResult<AstNode> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span;
            lhs = AstNode::new(NodeKind::BinOp, Token::Binary(op), span, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<AstNode> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Minus => {
                // `-<digits>` is a negative literal; anything else is negation.
                if let Tok::Int(v) = *self.peek_at(1) {
                    self.bump();
                    let value = self.int_value(v, true)?;
                    self.bump();
                    let lit = AstNode::new(NodeKind::Literal, Token::Lit(Value::Int(value)), span, vec![]);
                    return self.postfix(lit);
                }
                self.bump();
                let operand = self.unary()?;
                Ok(AstNode::new(NodeKind::UnOp, Token::Unary(UnaryOp::Neg), span, vec![operand]))
            }
            Tok::Bang => {
                self.bump();
                let operand = self.unary()?;
                Ok(AstNode::new(NodeKind::UnOp, Token::Unary(UnaryOp::Not), span, vec![operand]))
            }
            _ => {
                let base = self.primary()?;
                self.postfix(base)
            }
        }
    }

    fn postfix(&mut self, mut base: AstNode) -> PResult<AstNode> {
        while self.eat(&Tok::LBracket) {
            let index = self.expr()?;
            self.expect(Tok::RBracket, "`]`")?;
            let span = base.span;
            base = AstNode::new(NodeKind::Index, Token::None, span, vec![base, index]);
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<AstNode> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                let value = self.int_value(v, false)?;
                self.bump();
                Ok(AstNode::new(NodeKind::Literal, Token::Lit(Value::Int(value)), span, vec![]))
            }
            Tok::True | Tok::False | Tok::LBracket => {
                let value = self.constant()?;
                Ok(AstNode::new(NodeKind::Literal, Token::Lit(value), span, vec![]))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma, "`,` or `)`")?;
                        }
                    }
                    Ok(AstNode::new(NodeKind::Call, Token::Ident(name), span, args))
                } else {
                    Ok(AstNode::new(NodeKind::VarRef, Token::Ident(name), span, vec![]))
                }
            }
            other => self.error(format!("expected an expression, found {}", other.describe())),
        }
    }
}
