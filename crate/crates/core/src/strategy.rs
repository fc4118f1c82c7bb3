//! Ranking strategy expressions.
//!
//! ```text
//! strategy := fusion "(" strategy ("," strategy)* ")"
//!           | scheme [ "(" doc_fusion ")" ]              bm25(rr), tfidf(meank:5)
//!           | exact  [ "(" [scaling "-"] aggregation ")" ]  rec-iaf(sqrt-mean), ec-iaf(max)
//!           | related [ "(" scaling ")" ]                aer, raer(sigmoid), aes
//! ```
//!
//! Omitted arguments and all numeric parameters come from the
//! [`EngineConfig`].

use std::fmt;

use serde::Serialize;

use crate::config::{parse_profile_method_name, EngineConfig};
use crate::doc_retrieval::{DocFusion, ScoringScheme};
use crate::error::{Error, Result};
use crate::fusion::FusionMethod;
use crate::profile_retrieval::{Aggregation, ExactMethod, ProfileMethod, RelatedMethod, Scaling};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Strategy {
    Doc {
        scheme: ScoringScheme,
        fusion: DocFusion,
    },
    Profile(ProfileMethod),
    Fused {
        method: FusionMethod,
        parts: Vec<Strategy>,
    },
}

#[derive(Debug)]
struct Node {
    name: String,
    args: Vec<Node>,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::InvalidArgument(format!(
            "strategy `{}`: {msg} at offset {}",
            self.src, self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || "-_:+.".contains(c)))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("expected a name"));
        }
        self.pos += len;
        Ok(rest[..len].to_ascii_lowercase())
    }

    fn node(&mut self) -> Result<Node> {
        let name = self.ident()?;
        let mut args = Vec::new();
        if self.eat('(') {
            loop {
                args.push(self.node()?);
                if self.eat(')') {
                    break;
                }
                if !self.eat(',') {
                    return Err(self.err("expected `,` or `)`"));
                }
            }
        }
        Ok(Node { name, args })
    }
}

fn single_atom<'n>(node: &'n Node, what: &str) -> Result<Option<&'n str>> {
    match node.args.as_slice() {
        [] => Ok(None),
        [arg] if arg.args.is_empty() => Ok(Some(arg.name.as_str())),
        _ => Err(Error::InvalidArgument(format!(
            "`{}` takes at most one {what}",
            node.name
        ))),
    }
}

fn build(node: &Node, config: &EngineConfig) -> Result<Strategy> {
    let name = node.name.as_str();
    if let Ok(method) = name.parse::<FusionMethod>() {
        if node.args.is_empty() {
            return Err(Error::InvalidArgument(format!("`{name}` needs at least one run")));
        }
        let parts = node
            .args
            .iter()
            .map(|a| build(a, config))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Strategy::Fused { method, parts });
    }
    if let Ok(scheme) = config.scheme_named(name) {
        let fusion = match single_atom(node, "document fusion")? {
            Some(f) => DocFusion::parse(f, config.meank_k)?,
            None => config.doc_fusion()?,
        };
        fusion.validate()?;
        scheme.validate()?;
        return Ok(Strategy::Doc { scheme, fusion });
    }
    match parse_profile_method_name(name)? {
        Ok(method) => {
            let mut c = config.exact_config(method);
            if let Some(arg) = single_atom(node, "scaling/aggregation")? {
                for part in arg.split('-') {
                    if let Ok(s) = part.parse::<Scaling>() {
                        c.scaling = s;
                    } else if let Ok(a) = part.parse::<Aggregation>() {
                        c.aggregation = a;
                    } else {
                        return Err(Error::InvalidArgument(format!(
                            "`{part}` is neither a scaling nor an aggregation"
                        )));
                    }
                }
            }
            Ok(Strategy::Profile(ProfileMethod::Exact(c)))
        }
        Err(method) => {
            let mut c = config.related_config(method);
            if let Some(arg) = single_atom(node, "scaling")? {
                c.scaling = arg.parse()?;
            }
            c.validate()?;
            Ok(Strategy::Profile(ProfileMethod::Related(c)))
        }
    }
}

impl Strategy {
    pub fn parse(src: &str, config: &EngineConfig) -> Result<Self> {
        let mut p = Parser { src, pos: 0 };
        let node = p.node()?;
        p.skip_ws();
        if p.pos != src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        build(&node, config)
    }

    /// Leaf strategies in left-to-right order.
    pub fn leaves(&self) -> Vec<&Strategy> {
        match self {
            Strategy::Fused { parts, .. } => parts.iter().flat_map(Strategy::leaves).collect(),
            leaf => vec![leaf],
        }
    }

    pub fn needs_entities(&self) -> bool {
        self.leaves()
            .iter()
            .any(|s| matches!(s, Strategy::Profile(_)))
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Doc { scheme, fusion } => write!(f, "{}({})", scheme.name(), fusion),
            Strategy::Profile(ProfileMethod::Exact(c)) => match c.method {
                ExactMethod::RecIaf => write!(
                    f,
                    "rec-iaf({}-{})",
                    c.scaling.as_str(),
                    c.aggregation.as_str()
                ),
                m => write!(f, "{}({})", m.as_str(), c.aggregation.as_str()),
            },
            Strategy::Profile(ProfileMethod::Related(c)) => match c.method {
                RelatedMethod::Raer => write!(f, "raer({})", c.scaling.as_str()),
                m => f.write_str(m.as_str()),
            },
            Strategy::Fused { method, parts } => {
                write!(f, "{}(", method.as_str())?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
        }
    }
}
